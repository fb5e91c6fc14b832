"""Distance-kernel density estimation and density evaluation on the latent space.

Kernels are Gaussian in the geodesic distance.  On R^d the normaliser is the
usual (2 pi h^2)^(d/2); on the half-plane it is the integral of
exp(-r^2 / 2h^2) against the hyperbolic area element, computed by quadrature
and cached per bandwidth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from . import _kernels
from .errors import UsageError
from .geometry import (
    Configuration,
    GaussianEuclidean,
    HyperGaussian,
    KdeEstimate,
    LatentSpace,
    NodeDensity,
    dist_to_origin,
    polar_to_halfplane,
)

MIN_GRID_POINTS = 32


@lru_cache(maxsize=256)
def hyperbolic_kernel_normalizer(h: float) -> float:
    """2 pi * integral_0^inf exp(-r^2 / 2h^2) sinh(r) dr, by adaptive quadrature."""
    if not h > 0:
        raise UsageError("bandwidth must be positive")
    # integrand = exp(-r^2/2h^2 + r) (1 - exp(-2r)) / 2, peaked near r = h^2
    shift = h * h / 2.0
    upper = h * h + 40.0 * h + 40.0

    def integrand(r):
        return 0.5 * math.exp(-(r - h * h) ** 2 / (2 * h * h)) * -math.expm1(-2.0 * r)

    val, _ = integrate.quad(integrand, 0.0, upper, points=[h * h], epsabs=0.0, epsrel=1e-13, limit=400)
    return 2.0 * math.pi * val * math.exp(shift)


def kernel_normalizer(space: LatentSpace, h: float) -> float:
    if space.hyperbolic:
        return hyperbolic_kernel_normalizer(float(h))
    return (2.0 * math.pi * h * h) ** (space.dim / 2.0)


def default_bandwidth(points: Configuration) -> float:
    """c * n^(-1/(4+dim)) with c half the median pairwise distance."""
    n = points.n
    c = 1.0
    if n >= 2:
        D = points.pairwise_distances()
        med = float(np.median(D[np.triu_indices(n, 1)]))
        if med > 0:
            c = med / 2.0
    return c * n ** (-1.0 / (4 + points.space.dim))


def kde(points: Configuration, bandwidth: float = None, space: LatentSpace = None) -> KdeEstimate:
    """Kernel density estimate with one normalised distance kernel per point."""
    if space is not None and points.space != space:
        raise UsageError("points are not in the given space")
    if bandwidth is None:
        bandwidth = default_bandwidth(points)
    if not bandwidth > 0:
        raise UsageError("bandwidth must be positive")
    return KdeEstimate(points, bandwidth)


def density_eval(f: NodeDensity, z):
    """Density of ``f`` at one point (returns float) or at each row of ``z``."""
    space = f.space
    single = np.ndim(z) == 1
    Z = space.check_points(z)
    if isinstance(f, GaussianEuclidean):
        diff = Z - f.mean
        sol = np.linalg.solve(f._chol, diff.T)
        logdet = 2.0 * np.sum(np.log(np.diag(f._chol)))
        out = np.exp(-0.5 * np.sum(sol * sol, axis=0) - 0.5 * (f.mean.size * math.log(2 * math.pi) + logdet))
    elif isinstance(f, HyperGaussian):
        d = _kernels.cross_dist(Z, f.center[None, :], True)[:, 0]
        out = np.exp(-d * d / (2.0 * f.sigma ** 2)) / hyperbolic_kernel_normalizer(f.sigma)
    elif isinstance(f, KdeEstimate):
        s = _kernels.kernel_sum(Z, f.points.coords, f.bandwidth, space.hyperbolic)
        out = s / (f.points.n * kernel_normalizer(space, f.bandwidth))
    else:
        raise UsageError(f"cannot evaluate {type(f).__name__}")
    return float(out[0]) if single else out


# --------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class GridSpec:
    """Quadrature resolution and extent.

    ``radius``/``center`` default to values derived from the density being
    integrated (see :func:`support_radius`).
    """

    points_per_axis: int = 64
    radius: float = None
    center: tuple = None

    def __post_init__(self):
        if self.points_per_axis < MIN_GRID_POINTS:
            raise UsageError(f"grid too coarse: need at least {MIN_GRID_POINTS} points per axis")


@dataclass(frozen=True)
class QuadratureGrid:
    space: LatentSpace
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def ball_grid(space: LatentSpace, center, radius: float, points_per_axis: int) -> QuadratureGrid:
    """Quadrature rule covering the ball of ``radius`` about ``center``.

    R^d: midpoint rule on the enclosing cube.  Half-plane: geodesic polar
    coordinates about ``center`` with Gauss-Legendre radii and equispaced
    angles, weights sinh(r) dr dtheta (the hyperbolic area element).
    """
    if points_per_axis < MIN_GRID_POINTS:
        raise UsageError(f"grid too coarse: need at least {MIN_GRID_POINTS} points per axis")
    k = int(points_per_axis)
    center = np.asarray(center, dtype=float)
    if space.hyperbolic:
        xg, wg = np.polynomial.legendre.leggauss(k)
        r = 0.5 * radius * (xg + 1.0)
        wr = 0.5 * radius * wg * np.sinh(r)
        theta = 2.0 * math.pi * np.arange(k) / k
        R, T = np.meshgrid(r, theta, indexing="ij")
        nodes = polar_to_halfplane(R.ravel(), T.ravel(), center)
        weights = np.repeat(wr, k) * (2.0 * math.pi / k)
        return QuadratureGrid(space, nodes, weights)
    d = space.dim
    h = 2.0 * radius / k
    axis = -radius + h * (np.arange(k) + 0.5)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    nodes = np.column_stack([m.ravel() for m in mesh]) + center
    return QuadratureGrid(space, nodes, np.full(nodes.shape[0], h ** d))


def support_radius(f: NodeDensity) -> float:
    """Radius about ``f.location`` outside which ``f`` carries negligible mass."""
    if isinstance(f, GaussianEuclidean):
        return 9.0 * math.sqrt(float(np.max(np.linalg.eigvalsh(f.cov)))) + float(
            np.linalg.norm(f.mean - f.location)
        )
    if isinstance(f, HyperGaussian):
        return f.sigma ** 2 + 9.0 * f.sigma
    if isinstance(f, KdeEstimate):
        loc = f.location[None, :]
        far = float(np.max(_kernels.cross_dist(f.points.coords, loc, f.space.hyperbolic)))
        h = f.bandwidth
        tail = h * h + 9.0 * h if f.space.hyperbolic else 9.0 * h
        return far + tail
    raise UsageError(f"unknown density {type(f).__name__}")


def grid_for(f: NodeDensity, spec: GridSpec = None) -> QuadratureGrid:
    spec = GridSpec() if spec is None else spec
    center = f.location if spec.center is None else np.asarray(spec.center, dtype=float)
    radius = support_radius(f) if spec.radius is None else spec.radius
    return ball_grid(f.space, center, radius, spec.points_per_axis)


def support_ball_mass(f: NodeDensity, radius: float, points_per_axis: int = 128) -> float:
    """Mass of ``f`` inside the ball of ``radius`` about the space origin."""
    space = f.space
    grid = ball_grid(space, space.origin, radius, points_per_axis)
    vals = density_eval(f, grid.nodes)
    if not space.hyperbolic:
        vals = np.where(dist_to_origin(space, grid.nodes) <= radius, vals, 0.0)
    return grid.integrate(vals)
