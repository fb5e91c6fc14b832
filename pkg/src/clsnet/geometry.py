"""Latent spaces, configurations, isometries and node densities.

Two spaces are supported: Euclidean space of any dimension and the Poincare
half-plane, stored in (x, y) coordinates with y > 0 and metric
(dx^2 + dy^2) / y^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _kernels
from .errors import DomainError, SamplingError, SingularityError, UsageError

ISO_TOL = 1e-10
MAX_PROPOSALS_PER_POINT = 10**6


def as_rng(seed):
    """Accept an int seed, a SeedSequence or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# --------------------------------------------------------------------------
# spaces and configurations


@dataclass(frozen=True)
class LatentSpace:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in ("euclidean", "halfplane"):
            raise UsageError(f"unknown latent space kind {self.kind!r}")
        if self.kind == "halfplane" and self.dim != 2:
            raise UsageError("the half-plane is two-dimensional")
        if int(self.dim) != self.dim or self.dim < 1:
            raise UsageError("dimension must be a positive integer")

    @classmethod
    def euclidean(cls, dim: int) -> "LatentSpace":
        return cls("euclidean", int(dim))

    @classmethod
    def halfplane(cls) -> "LatentSpace":
        return cls("halfplane", 2)

    @property
    def hyperbolic(self) -> bool:
        return self.kind == "halfplane"

    @property
    def origin(self) -> np.ndarray:
        """Reference point: 0 in R^d, i = (0, 1) in the half-plane."""
        o = np.zeros(self.dim)
        if self.hyperbolic:
            o[1] = 1.0
        return o

    @property
    def n_components(self) -> int:
        """Connected components of the isometry group."""
        return 2

    @property
    def n_iso_params(self) -> int:
        if self.hyperbolic:
            return 3
        return self.dim * (self.dim - 1) // 2 + self.dim

    def check_points(self, pts) -> np.ndarray:
        """Return ``pts`` as a float (n, dim) array or raise DomainError."""
        arr = np.asarray(pts, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise UsageError(f"expected points of dimension {self.dim}, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("non-finite coordinates")
        if self.hyperbolic and np.any(arr[:, 1] <= 0):
            raise DomainError("half-plane points need a strictly positive y coordinate")
        return arr

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dim": self.dim}

    @classmethod
    def from_dict(cls, d: dict) -> "LatentSpace":
        if d["kind"] == "halfplane":
            return cls.halfplane()
        return cls.euclidean(d.get("dim", 2))


@dataclass(frozen=True, eq=False)
class Configuration:
    """Ordered tuple of points in one latent space; ``coords`` has shape (n, dim)."""

    space: LatentSpace
    coords: np.ndarray

    def __post_init__(self):
        arr = self.space.check_points(self.coords)
        if arr.shape[0] < 1:
            raise UsageError("a configuration needs at least one point")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def __len__(self):
        return self.n

    def __eq__(self, other):
        return (
            isinstance(other, Configuration)
            and self.space == other.space
            and np.array_equal(self.coords, other.coords)
        )

    def pairwise_distances(self) -> np.ndarray:
        return _kernels.pair_dist(self.coords, self.space.hyperbolic)


def _check_pair(space, p, q):
    p = space.check_points(p)
    q = space.check_points(q)
    if p.shape[0] != 1 or q.shape[0] != 1:
        raise UsageError("dist expects single points")
    return p[0], q[0]


def _hyper_dist(p, q):
    sq = (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2
    # arccosh(1 + sq / (2 py qy)) written through asinh for accuracy near 0
    return 2.0 * math.asinh(math.sqrt(sq / (4.0 * p[1] * q[1])))


def dist(space: LatentSpace, p, q) -> float:
    """Geodesic distance between two points of ``space``."""
    if isinstance(p, Configuration) or isinstance(q, Configuration):
        raise UsageError("dist takes points; use Configuration.pairwise_distances")
    p, q = _check_pair(space, p, q)
    if space.hyperbolic:
        return _hyper_dist(p, q)
    return float(math.sqrt(float(np.dot(p - q, p - q))))


def dist_grad(space: LatentSpace, p, q):
    """Riemannian gradients of dist(., q) at p and of dist(p, .) at q.

    Raises SingularityError when the points coincide (dist < 1e-12).
    """
    p, q = _check_pair(space, p, q)
    t = dist(space, p, q)
    if t < _kernels.SINGULAR_TOL:
        raise SingularityError("distance gradient is singular at coincident points")
    if not space.hyperbolic:
        u = (p - q) / t
        return u, -u
    dx, dy = p[0] - q[0], p[1] - q[1]
    sq = dx * dx + dy * dy
    pq = p[1] * q[1]
    c = 1.0 / math.sinh(t)
    gp = c * np.array([dx / pq, dy / pq - sq / (2.0 * p[1] * pq)])
    gq = c * np.array([-dx / pq, -dy / pq - sq / (2.0 * q[1] * pq)])
    # Riemannian gradient = y^2 * coordinate gradient for this metric
    return gp * p[1] ** 2, gq * q[1] ** 2


def riemannian_norm(space: LatentSpace, X, V) -> np.ndarray:
    """Per-point Riemannian norm of tangent vectors ``V`` at points ``X``."""
    norms = np.linalg.norm(np.atleast_2d(V), axis=1)
    if space.hyperbolic:
        norms = norms / np.atleast_2d(X)[:, 1]
    return norms


def dist_to_origin(space: LatentSpace, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return _kernels.cross_dist(X, space.origin[None, :], space.hyperbolic)[:, 0]


# --------------------------------------------------------------------------
# half-plane helpers


def _mobius(M, z):
    a, b, c, d = M[0, 0], M[0, 1], M[1, 0], M[1, 1]
    return (a * z + b) / (c * z + d)


def _to_complex(X):
    return X[:, 0] + 1j * X[:, 1]


def _from_complex(z):
    return np.column_stack([z.real, z.imag])


def _reflect_conj(M):
    # r . M = M' . r  where r(z) = -conj(z)
    return np.array([[M[0, 0], -M[0, 1]], [-M[1, 0], M[1, 1]]])


def sl2_moving_origin_to(point) -> np.ndarray:
    """SL(2,R) matrix of z -> y0 z + x0, which sends i to (x0, y0)."""
    x0, y0 = float(point[0]), float(point[1])
    r = math.sqrt(y0)
    return np.array([[r, x0 / r], [0.0, 1.0 / r]])


def halfplane_to_disk(X, center=(0.0, 1.0)) -> np.ndarray:
    """Cayley map to the Poincare disk with ``center`` sent to 0 (complex output)."""
    M = np.linalg.inv(sl2_moving_origin_to(center))
    z = _mobius(M, _to_complex(np.atleast_2d(X)))
    return (z - 1j) / (z + 1j)


def disk_to_halfplane(w, center=(0.0, 1.0)) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    z = 1j * (1.0 + w) / (1.0 - w)
    z = _mobius(sl2_moving_origin_to(center), z)
    return _from_complex(z)


def polar_to_halfplane(r, theta, center=(0.0, 1.0)) -> np.ndarray:
    """Point at geodesic distance ``r`` from ``center`` in direction ``theta``."""
    w = np.tanh(np.asarray(r) / 2.0) * np.exp(1j * np.asarray(theta))
    return disk_to_halfplane(w, center)


def hyperbolic_midpoint(X) -> np.ndarray:
    """Normalised mean on the hyperboloid model; commutes with every isometry."""
    X = np.atleast_2d(X)
    x, y = X[:, 0], X[:, 1]
    sq = x * x + y * y
    h0 = np.mean((sq + 1.0) / (2.0 * y))
    h1 = np.mean(x / y)
    h2 = np.mean((sq - 1.0) / (2.0 * y))
    norm = math.sqrt(h0 * h0 - h1 * h1 - h2 * h2)
    h0, h1, h2 = h0 / norm, h1 / norm, h2 / norm
    ym = 1.0 / (h0 - h2)
    return np.array([h1 * ym, ym])


def project_to_ball(space: LatentSpace, X, radius: float) -> np.ndarray:
    """Geodesic projection of each row of ``X`` onto the closed ball about the origin."""
    X = np.array(X, dtype=float)
    if space.hyperbolic:
        w = halfplane_to_disk(X)
        rho = np.abs(w)
        lim = math.tanh(radius / 2.0)
        out = rho > lim
        if np.any(out):
            w[out] *= lim / rho[out]
            X[out] = disk_to_halfplane(w[out])
        return X
    norms = np.linalg.norm(X, axis=1)
    out = norms > radius
    X[out] *= (radius / norms[out])[:, None]
    return X


# --------------------------------------------------------------------------
# isometries


@dataclass(frozen=True, eq=False)
class Isometry:
    """Element of the isometry group.

    Euclidean: ``x -> matrix @ x + translation`` with orthogonal ``matrix``.
    Half-plane: ``z -> mobius(matrix)(r(z))`` with ``matrix`` in SL(2,R) and
    ``r(z) = -conj(z)`` when ``reflect`` is set, the identity otherwise.
    """

    space: LatentSpace
    matrix: np.ndarray
    translation: np.ndarray = None
    reflect: bool = False

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", M)
        if self.space.hyperbolic:
            if M.shape != (2, 2):
                raise UsageError("half-plane isometry needs a 2x2 matrix")
            if abs(np.linalg.det(M) - 1.0) > ISO_TOL:
                raise UsageError("half-plane isometry matrix must have determinant 1")
            object.__setattr__(self, "reflect", bool(self.reflect))
        else:
            d = self.space.dim
            if M.shape != (d, d):
                raise UsageError(f"Euclidean isometry needs a {d}x{d} matrix")
            if np.max(np.abs(M.T @ M - np.eye(d))) > ISO_TOL:
                raise UsageError("Euclidean isometry matrix must be orthogonal")
            t = np.zeros(d) if self.translation is None else np.array(self.translation, dtype=float)
            if t.shape != (d,):
                raise UsageError("translation has the wrong dimension")
            object.__setattr__(self, "translation", t)
            object.__setattr__(self, "reflect", bool(np.linalg.det(M) < 0))

    @classmethod
    def identity(cls, space: LatentSpace) -> "Isometry":
        if space.hyperbolic:
            return cls(space, np.eye(2))
        return cls(space, np.eye(space.dim), np.zeros(space.dim))

    @classmethod
    def from_params(cls, space: LatentSpace, params, reflect: bool = False) -> "Isometry":
        """Build an isometry from ``space.n_iso_params`` reals and a component bit.

        Euclidean: d(d-1)/2 Givens rotation angles (pairs i < j) followed by the
        d translation entries.
        Half-plane: (b, s, theta) giving translate(b) . dilate(e^s) . rotate(theta)
        where the rotation is about i.
        """
        params = np.asarray(params, dtype=float)
        if params.shape != (space.n_iso_params,):
            raise UsageError(f"expected {space.n_iso_params} isometry parameters")
        if space.hyperbolic:
            b, s, th = params
            N = np.array([[1.0, b], [0.0, 1.0]])
            A = np.array([[math.exp(s / 2), 0.0], [0.0, math.exp(-s / 2)]])
            K = np.array([[math.cos(th), math.sin(th)], [-math.sin(th), math.cos(th)]])
            return cls(space, N @ A @ K, reflect=reflect)
        d = space.dim
        k = d * (d - 1) // 2
        Q = _kernels.givens_rotation(params[:k], d)
        if reflect:
            Q = Q @ np.diag([-1.0] + [1.0] * (d - 1))
        return cls(space, Q, params[k:])

    def apply_points(self, X) -> np.ndarray:
        X = self.space.check_points(X)
        if self.space.hyperbolic:
            z = _to_complex(X)
            if self.reflect:
                z = -np.conj(z)
            out = _from_complex(_mobius(self.matrix, z))
            # Mobius maps can drift a hair below the axis for points at y ~ 1e-300
            out[:, 1] = np.maximum(out[:, 1], np.finfo(float).tiny)
            return out
        return X @ self.matrix.T + self.translation

    def __call__(self, c: Configuration) -> Configuration:
        return apply_isometry(self, c)

    def compose(self, other: "Isometry") -> "Isometry":
        """Return ``self . other`` (apply ``other`` first)."""
        if other.space != self.space:
            raise UsageError("cannot compose isometries of different spaces")
        if self.space.hyperbolic:
            M2 = _reflect_conj(other.matrix) if self.reflect else other.matrix
            return Isometry(self.space, self.matrix @ M2, reflect=self.reflect ^ other.reflect)
        return Isometry(
            self.space,
            self.matrix @ other.matrix,
            self.matrix @ other.translation + self.translation,
        )

    def inverse(self) -> "Isometry":
        if self.space.hyperbolic:
            a, b, c, d = self.matrix.ravel()
            Minv = np.array([[d, -b], [-c, a]])
            if self.reflect:
                Minv = _reflect_conj(Minv)
            return Isometry(self.space, Minv, reflect=self.reflect)
        Qt = self.matrix.T
        return Isometry(self.space, Qt, -Qt @ self.translation)

    def to_dict(self) -> dict:
        d = {"space": self.space.to_dict(), "matrix": self.matrix.tolist(), "reflect": self.reflect}
        if not self.space.hyperbolic:
            d["translation"] = self.translation.tolist()
        return d


def apply_isometry(iso: Isometry, c: Configuration) -> Configuration:
    if iso.space != c.space:
        raise UsageError("isometry and configuration live in different spaces")
    return Configuration(c.space, iso.apply_points(c.coords))


def random_isometry(space: LatentSpace, seed=None, scale: float = 1.0) -> Isometry:
    """Random isometry, used by tests and the invariance checks."""
    rng = as_rng(seed)
    params = rng.normal(scale=scale, size=space.n_iso_params)
    if not space.hyperbolic:
        k = space.n_iso_params - space.dim
        params[:k] = rng.uniform(-math.pi, math.pi, size=k)
    return Isometry.from_params(space, params, reflect=bool(rng.integers(2)))


# --------------------------------------------------------------------------
# node densities


@dataclass(frozen=True, eq=False)
class GaussianEuclidean:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise UsageError("covariance shape does not match the mean")
        if not np.allclose(cov, cov.T):
            raise UsageError("covariance must be symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise UsageError("covariance must be positive definite") from None
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def space(self) -> LatentSpace:
        return LatentSpace.euclidean(self.mean.size)

    @property
    def location(self) -> np.ndarray:
        return self.mean

    def to_dict(self) -> dict:
        return {"kind": "gaussian", "mean": self.mean.tolist(), "cov": self.cov.tolist()}


@dataclass(frozen=True, eq=False)
class HyperGaussian:
    """Density proportional to exp(-dist(z, center)^2 / (2 sigma^2)) on the half-plane."""

    center: np.ndarray
    sigma: float

    def __post_init__(self):
        c = LatentSpace.halfplane().check_points(self.center)[0]
        if not self.sigma > 0:
            raise UsageError("sigma must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def space(self) -> LatentSpace:
        return LatentSpace.halfplane()

    @property
    def location(self) -> np.ndarray:
        return self.center

    def to_dict(self) -> dict:
        return {"kind": "hypergaussian", "center": self.center.tolist(), "sigma": self.sigma}


@dataclass(frozen=True, eq=False)
class KdeEstimate:
    """Distance-kernel density estimate; see :func:`clsnet.density.kde`."""

    points: Configuration
    bandwidth: float

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise UsageError("bandwidth must be positive")
        object.__setattr__(self, "bandwidth", float(self.bandwidth))

    @property
    def space(self) -> LatentSpace:
        return self.points.space

    @property
    def location(self) -> np.ndarray:
        X = self.points.coords
        if self.space.hyperbolic:
            return hyperbolic_midpoint(X)
        return X.mean(axis=0)

    def to_dict(self) -> dict:
        return {
            "kind": "kde",
            "space": self.space.to_dict(),
            "points": self.points.coords.tolist(),
            "bandwidth": self.bandwidth,
        }


NodeDensity = Union[GaussianEuclidean, HyperGaussian, KdeEstimate]


def density_from_dict(d: dict) -> NodeDensity:
    kind = d["kind"]
    if kind == "gaussian":
        return GaussianEuclidean(d["mean"], d["cov"])
    if kind == "hypergaussian":
        return HyperGaussian(d.get("center", [0.0, 1.0]), d["sigma"])
    if kind == "kde":
        space = LatentSpace.from_dict(d["space"])
        return KdeEstimate(Configuration(space, d["points"]), d["bandwidth"])
    raise UsageError(f"unknown density kind {kind!r}")


def sample_hyperbolic_radii(sigma: float, n: int, rng, max_proposals: int = None) -> np.ndarray:
    """Draw geodesic radii with density proportional to exp(-r^2/2 sigma^2) sinh(r).

    Proposal: N(sigma^2, sigma^2) restricted to r >= 0, whose density is
    proportional to exp(-r^2/2 sigma^2 + r) >= 2 sinh(r) exp(-r^2/2 sigma^2).
    Acceptance probability is therefore 1 - exp(-2 r).
    """
    if max_proposals is None:
        max_proposals = MAX_PROPOSALS_PER_POINT * n
    out = np.empty(n)
    filled = 0
    used = 0
    s2 = sigma * sigma
    while filled < n:
        if used >= max_proposals:
            raise SamplingError(f"rejection sampler exceeded {max_proposals} proposals")
        batch = int(min(max(4 * (n - filled), 64), max_proposals - used))
        r = rng.normal(s2, sigma, size=batch)
        u = rng.random(batch)
        used += batch
        acc = r[(r >= 0) & (u < -np.expm1(-2.0 * np.maximum(r, 0.0)))]
        take = min(acc.size, n - filled)
        out[filled:filled + take] = acc[:take]
        filled += take
    return out


def sample_hyperbolic_kernel(centers, sigma: float, rng) -> np.ndarray:
    """One draw from the hyperbolic Gaussian kernel about each row of ``centers``."""
    centers = np.atleast_2d(centers)
    r = sample_hyperbolic_radii(sigma, centers.shape[0], rng)
    theta = rng.uniform(0.0, 2.0 * math.pi, size=centers.shape[0])
    # sample at i, then move i to each centre by z -> y0 z + x0
    base = polar_to_halfplane(r, theta)
    return np.column_stack([centers[:, 1] * base[:, 0] + centers[:, 0], centers[:, 1] * base[:, 1]])


def sample_density(f: NodeDensity, n: int, rng_seed=None) -> Configuration:
    """Draw ``n`` iid points from ``f``; deterministic given the seed."""
    if int(n) != n or n < 1:
        raise UsageError("sample_density needs n >= 1")
    n = int(n)
    rng = as_rng(rng_seed)
    if isinstance(f, GaussianEuclidean):
        z = rng.standard_normal((n, f.mean.size))
        return Configuration(f.space, f.mean + z @ f._chol.T)
    if isinstance(f, HyperGaussian):
        return Configuration(f.space, sample_hyperbolic_kernel(np.tile(f.center, (n, 1)), f.sigma, rng))
    if isinstance(f, KdeEstimate):
        idx = rng.integers(0, f.points.n, size=n)
        centers = f.points.coords[idx]
        if f.space.hyperbolic:
            return Configuration(f.space, sample_hyperbolic_kernel(centers, f.bandwidth, rng))
        return Configuration(f.space, centers + f.bandwidth * rng.standard_normal(centers.shape))
    raise UsageError(f"cannot sample from {type(f).__name__}")
