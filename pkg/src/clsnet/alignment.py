"""Distances between isometry classes of configurations and of densities.

Both searches run once per connected component of the isometry group
(orientation-preserving and reversing), start from a closed-form or coarse-grid
initial guess, and refine with Nelder-Mead over the group parameters.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .density import GridSpec, density_eval, grid_for
from .errors import UsageError
from .geometry import (
    Configuration,
    Isometry,
    KdeEstimate,
    LatentSpace,
    NodeDensity,
    hyperbolic_midpoint,
    sl2_moving_origin_to,
)

N_ROTATION_STARTS = 8
NM_ROUNDS = 6
N_REFINED_STARTS = 8
# relative gap after the coarse round beyond which a start is dropped
POLISH_MARGIN = 1e-3
# (xatol, fatol) of the coarse round
COARSE_TOL = (1e-4, 1e-7)


def paired_distances(space: LatentSpace, A, B) -> np.ndarray:
    """dist(A[i], B[i]) for each row."""
    diff = A - B
    sq = np.einsum("ij,ij->i", diff, diff)
    if space.hyperbolic:
        return 2.0 * np.arcsinh(np.sqrt(sq / (4.0 * A[:, 1] * B[:, 1])))
    return np.sqrt(sq)


def _translation(space, v):
    return Isometry(space, np.eye(space.dim), np.asarray(v, dtype=float))


def _move_origin_to(space, point) -> Isometry:
    """Isometry sending the space origin to ``point`` without rotating."""
    if space.hyperbolic:
        return Isometry(space, sl2_moving_origin_to(point))
    return _translation(space, point)


def _reflection(space) -> Isometry:
    if space.hyperbolic:
        return Isometry(space, np.eye(2), reflect=True)
    return Isometry(space, np.diag([-1.0] + [1.0] * (space.dim - 1)))


def _rotation_params(space, angle) -> np.ndarray:
    """Local parameters of a rotation by ``angle`` (first coordinate plane in R^d).

    In the half-plane K(theta) turns tangent vectors by 2 theta.
    """
    p = np.zeros(space.n_iso_params)
    if space.hyperbolic:
        p[2] = 0.5 * angle
    else:
        p[0] = angle
    return p


def _rotation_about(space, center, angle) -> Isometry:
    """Rotation by ``angle`` about ``center``."""
    return _local(space, center, _rotation_params(space, angle))


def _local(space, center, params) -> Isometry:
    """Group element near the identity, parameterised about ``center``."""
    T = _move_origin_to(space, center)
    return T.compose(Isometry.from_params(space, params)).compose(T.inverse())


def _nelder_mead(obj, x0, scale):
    """Repeated Nelder-Mead until a restart no longer improves."""
    x = np.asarray(x0, dtype=float)
    fx = obj(x)
    k = x.size
    for rnd in range(NM_ROUNDS):
        simplex = np.vstack([x] + [x + scale * e for e in np.eye(k)])
        res = minimize(
            obj, x, method="Nelder-Mead",
            options={"initial_simplex": simplex, "xatol": 1e-11, "fatol": 1e-13,
                     "maxiter": 4000 * k, "maxfev": 4000 * k, "adaptive": k > 2},
        )
        improved = fx - res.fun
        if res.fun < fx:
            x, fx = res.x, res.fun
        if improved <= 1e-13 * max(1.0, abs(fx)) and rnd > 0:
            break
        scale = max(scale * 0.1, 1e-6)
    return x, fx


def _barycenter(space, X):
    if space.hyperbolic:
        return hyperbolic_midpoint(X)
    return X.mean(axis=0)


def _kabsch(X, Y, proper: bool):
    """Orthogonal Q (det +1 if proper else -1) minimising sum |Xc - Yc Q^T|^2."""
    Xc = X - X.mean(axis=0)
    Yc = Y - Y.mean(axis=0)
    U, _, Vt = np.linalg.svd(Yc.T @ Xc)
    d = np.ones(X.shape[1])
    det = np.linalg.det(Vt.T @ U.T)
    if (det > 0) != proper:
        d[-1] = -1.0
    return Vt.T @ np.diag(d) @ U.T


def _initial_guess(space, X, Y, reflect: bool) -> Isometry:
    """Closed-form phi with phi(Y) roughly on X, within one group component.

    R^d: centroid match plus orthogonal Procrustes restricted to the
    component.  Half-plane: match (x, log y) barycentres by a
    translation-dilation, composed with a reflection fixing the barycentre.
    """
    cx, cy = _barycenter(space, X), _barycenter(space, Y)
    if space.hyperbolic:
        T_y = _move_origin_to(space, cy)
        base = _move_origin_to(space, cx).compose(T_y.inverse())
        if reflect:
            base = base.compose(T_y.compose(_reflection(space)).compose(T_y.inverse()))
        return base
    Q = _kabsch(X, Y, proper=not reflect)
    return Isometry(space, Q, cx - Q @ cy)


def _rotation_starts(space, X, Y0, c, keep: int):
    """The ``keep`` best of N equally spaced rotations about ``c``, as (params, value) pairs."""
    if space.hyperbolic or space.dim >= 2:
        starts = [_rotation_params(space, 2 * math.pi * k / N_ROTATION_STARTS) for k in range(N_ROTATION_STARTS)]
    else:
        starts = [np.zeros(space.n_iso_params)]
    vals = [_kernels.align_objective(p, X, Y0, c, space.hyperbolic) for p in starts]
    order = np.argsort(vals, kind="stable")[:keep]
    return [(starts[k], vals[k]) for k in order]


def _refine(space, X, Y0, c, p, fx, rounds=range(NM_ROUNDS), tol=(1e-11, 1e-13)):
    """Nelder-Mead rounds with a shrinking initial simplex until no gain."""
    for rnd in rounds:
        scale = max(0.1 ** (rnd + 1), 1e-6)
        q, fq = _kernels.nelder_mead_align(X, Y0, c, space.hyperbolic, p, scale, *tol)
        gain = fx - fq
        if fq < fx:
            p, fx = q, fq
        if rnd > 0 and gain <= 1e-13 * max(1.0, fx):
            break
    return p, fx


def align_configs(x: Configuration, y: Configuration):
    """Approximate inf over isometries phi of sum_i dist(x_i, phi(y_i)).

    Returns ``(phi, value)`` with ``value`` recomputed exactly for ``phi``.
    """
    if x.space != y.space:
        raise UsageError("configurations live in different spaces")
    if x.n != y.n:
        raise UsageError("configurations must have the same number of points")
    space = x.space
    X, Y = x.coords, y.coords
    cx = _barycenter(space, X)

    def total(iso):
        return float(np.sum(paired_distances(space, X, iso.apply_points(Y))))

    # one coarse round from every start; later rounds only polish, so they
    # are spent on the starts that can still compete
    coarse = []
    for reflect in (False, True):
        g0 = _initial_guess(space, X, Y, reflect)
        Y0 = g0.apply_points(Y)
        for p, fx in _rotation_starts(space, X, Y0, cx, N_REFINED_STARTS):
            p, fx = _refine(space, X, Y0, cx, p, fx, rounds=range(1), tol=COARSE_TOL)
            coarse.append((g0, Y0, p, fx))
    cutoff = min(c[3] for c in coarse) * (1.0 + POLISH_MARGIN) + 1e-12

    best_iso, best_val = None, math.inf
    polished = []
    for g0, Y0, p, fx in coarse:
        # starts that reached the same coarse value share a basin: polish one
        if fx <= cutoff and all(abs(fx - v) > COARSE_TOL[1] * 10 * max(1.0, fx) for v in polished):
            polished.append(fx)
            p, fx = _refine(space, X, Y0, cx, p, fx, rounds=range(1, NM_ROUNDS))
            iso = _local(space, cx, p).compose(g0)
            val = total(iso)
            # ties go to the lower component index
            if val < best_val - 1e-12:
                best_iso, best_val = iso, val
    return best_iso, best_val


def _cost(f: NodeDensity) -> int:
    return f.points.n if isinstance(f, KdeEstimate) else 1


def density_class_distance(f: NodeDensity, g: NodeDensity, space: LatentSpace = None,
                           grid_spec: GridSpec = None) -> float:
    """Approximate inf over isometries phi of the L2 norm of f - g o phi.

    Uses ||f - g o phi||^2 = ||f||^2 + ||g||^2 - 2 <f, g o phi>, each squared
    norm integrated on a grid around its own density (the measure is
    isometry invariant) and the cross term on the grid of the costlier
    density, so that density is evaluated only once.
    """
    space = f.space if space is None else space
    if f.space != space or g.space != space:
        raise UsageError("densities live in different spaces")
    spec = GridSpec() if grid_spec is None else grid_spec
    gf, gg = grid_for(f, spec), grid_for(g, spec)
    fv = density_eval(f, gf.nodes)
    gv = density_eval(g, gg.nodes)
    ff = gf.integrate(fv * fv)
    gg2 = gg.integrate(gv * gv)

    # cross(phi) = int f(z) g(phi z) dz = int f(phi^-1 u) g(u) du
    on_f_grid = _cost(f) >= _cost(g)
    loc_f, loc_g = f.location, g.location

    def cross(phi):
        if on_f_grid:
            return gf.integrate(fv * density_eval(g, phi.apply_points(gf.nodes)))
        return gg.integrate(gv * density_eval(f, phi.inverse().apply_points(gg.nodes)))

    best = -math.inf
    for reflect in (False, True):
        # phi sends f's location to g's location
        T_f, T_g = _move_origin_to(space, loc_f), _move_origin_to(space, loc_g)
        base = T_g.compose(_reflection(space) if reflect else Isometry.identity(space)).compose(T_f.inverse())
        starts = [base.compose(_rotation_about(space, loc_f, 2 * math.pi * k / N_ROTATION_STARTS))
                  for k in range(N_ROTATION_STARTS)]
        g0 = max(starts, key=cross)

        def obj(p, g0=g0):
            return -cross(g0.compose(_local(space, loc_f, p)))

        _, val = _nelder_mead(obj, np.zeros(space.n_iso_params), 0.1)
        best = max(best, -val)
    return math.sqrt(max(ff + gg2 - 2.0 * best, 0.0))


def l2_distance_direct(f: NodeDensity, g: NodeDensity, phi: Isometry, grid) -> float:
    """||f - g o phi||_2 by direct quadrature on ``grid`` (no class minimisation)."""
    diff = density_eval(f, grid.nodes) - density_eval(g, phi.apply_points(grid.nodes))
    return math.sqrt(grid.integrate(diff * diff))
