"""Maximum-likelihood graph embedding by multi-start Riemannian gradient ascent."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from . import _kernels
from .errors import OptimizationError, UsageError
from .geometry import (
    Configuration,
    LatentSpace,
    as_rng,
    dist_to_origin,
    polar_to_halfplane,
    project_to_ball,
)
from .likelihood import loglik
from .links import Graph, LinkFunction

log = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-6
MIN_STEP = 1e-20
POLISH_ITERS = 500
# longer trial steps are cut short; the ball projection follows anyway
MAX_GEODESIC_STEP = 50.0


def default_t_max(n: int) -> float:
    return 4.0 * math.log(n)


@dataclass
class EmbeddingResult:
    estimate: Configuration
    objective: float
    restarts_used: int
    iterations: int
    converged: bool
    objective_trace: list
    at_boundary: bool = False
    restart_objectives: list = field(default_factory=list)
    best_restart: int = 0
    init_info: dict = field(default_factory=dict)

    def diagnostics(self) -> dict:
        return {
            "objective": self.objective,
            "restarts_used": self.restarts_used,
            "best_restart": self.best_restart,
            "restart_objectives": self.restart_objectives,
            "iterations": self.iterations,
            "converged": self.converged,
            "at_boundary": self.at_boundary,
            "objective_trace": self.objective_trace,
            "init_info": self.init_info,
        }


# --------------------------------------------------------------------------
# initialisation


def _random_ball(space: LatentSpace, n: int, radius: float, rng) -> np.ndarray:
    if space.hyperbolic:
        # area element sinh(r) dr dtheta: invert the radial CDF
        u = rng.random(n)
        r = np.arccosh(1.0 + u * (math.cosh(radius) - 1.0))
        theta = rng.uniform(0.0, 2.0 * math.pi, n)
        return polar_to_halfplane(r, theta)
    d = space.dim
    v = rng.standard_normal((n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * (radius * rng.random(n) ** (1.0 / d))[:, None]


def classical_mds(D: np.ndarray, dim: int) -> np.ndarray:
    """Classical (Torgerson) scaling of a distance matrix into ``dim`` coordinates."""
    n = D.shape[0]
    if n == 1:
        return np.zeros((1, dim))
    J = np.eye(n) - 1.0 / n
    B = -0.5 * J @ (D ** 2) @ J
    vals, vecs = np.linalg.eigh(B)
    order = np.argsort(vals)[::-1][:dim]
    vals = np.clip(vals[order], 0.0, None)
    out = vecs[:, order] * np.sqrt(vals)
    if out.shape[1] < dim:
        out = np.hstack([out, np.zeros((n, dim - out.shape[1]))])
    return out


def _graph_mds(G: Graph, dim: int, scale: float, info: dict) -> np.ndarray:
    n = G.n
    ncomp, labels = connected_components(csr_matrix(G.adjacency), directed=False)
    hops = shortest_path(csr_matrix(G.adjacency), unweighted=True, directed=False)
    out = np.zeros((n, dim))
    offset = 0.0
    for k in range(ncomp):
        idx = np.flatnonzero(labels == k)
        sub = classical_mds(hops[np.ix_(idx, idx)] * scale, dim)
        sub -= sub.mean(axis=0)
        if ncomp > 1:
            extent = float(np.max(np.abs(sub[:, 0]))) if idx.size > 1 else 0.0
            offset += extent
            sub[:, 0] += offset
            offset += extent + scale
        out[idx] = sub
    if ncomp > 1:
        out[:, 0] -= out[:, 0].mean()
        info["disconnected_components"] = int(ncomp)
        log.info("graph has %d components; MDS done per component", ncomp)
    return out


def init_embedding(G: Graph, space: LatentSpace, w: LinkFunction, strategy: str = "random-ball",
                   rng_seed=None, t_max: float = None, info: dict = None) -> Configuration:
    """Starting configuration for :func:`mle_embed`.

    ``random-ball`` draws uniformly (w.r.t. the Riemannian volume) in the ball of
    radius ``t_max / 2``.  ``graph-mds`` scales hop distances by ln n and embeds
    them by classical MDS; for the half-plane the MDS output is read as
    (x, log y).  ``info``, when given, receives diagnostics.
    """
    if G.n < 1:
        raise UsageError("empty graph")
    info = {} if info is None else info
    n = G.n
    t_max = default_t_max(n) if t_max is None else t_max
    radius = t_max / 2.0
    if n == 1:
        return Configuration(space, space.origin[None, :])
    rng = as_rng(rng_seed)
    if strategy == "random-ball":
        X = _random_ball(space, n, radius, rng)
    elif strategy == "graph-mds":
        Y = _graph_mds(G, space.dim, math.log(n), info)
        # nodes with identical hop profiles land on the same spot
        Y += 1e-3 * rng.standard_normal(Y.shape)
        if space.hyperbolic:
            X = np.column_stack([Y[:, 0], np.exp(Y[:, 1])])
        else:
            X = Y
    else:
        raise UsageError(f"unknown init strategy {strategy!r}")
    return Configuration(space, project_to_ball(space, X, radius))


# --------------------------------------------------------------------------
# optimisation


def _retract(space: LatentSpace, X, V, step):
    """Exponential map: follow the geodesic from each point along ``step * V``."""
    if not space.hyperbolic:
        return X + step * V
    x, y = X[:, 0], X[:, 1]
    # z -> (z - x) / y sends the point to i and scales tangent vectors by 1/y
    u = step * (V[:, 0] + 1j * V[:, 1]) / y
    s = np.minimum(np.abs(u), MAX_GEODESIC_STEP)
    # geodesic from i with direction angle psi is K(theta)(i e^s), theta = (psi - pi/2) / 2
    th = 0.5 * (np.angle(u) - 0.5 * math.pi)
    c, sn = np.cos(th), np.sin(th)
    z = 1j * np.exp(s)
    w = (c * z + sn) / (c - sn * z)
    return np.column_stack([y * w.real + x, y * w.imag])


def _outward_unit(space: LatentSpace, X):
    """Riemannian unit vectors pointing away from the origin (radial direction)."""
    if space.hyperbolic:
        o = space.origin
        dx, dy = X[:, 0] - o[0], X[:, 1] - o[1]
        sq = dx * dx + dy * dy
        y = X[:, 1]
        t = dist_to_origin(space, X)
        k = 1.0 / np.sinh(np.maximum(t, 1e-300))
        gx = k * dx / y
        gy = k * (dy / y - sq / (2.0 * y * y))
        return np.column_stack([gx, gy]) * (y ** 2)[:, None]
    r = np.linalg.norm(X, axis=1)
    return X / np.maximum(r, 1e-300)[:, None]


def _inner(space, X, U, V):
    s = np.einsum("ij,ij->i", U, V)
    if space.hyperbolic:
        s = s / X[:, 1] ** 2
    return s


def _tangent_cone(space, X, grad, radius):
    """Drop the outward radial part of the gradient for points on the ball boundary."""
    on = dist_to_origin(space, X) >= radius - 1e-9
    if not np.any(on):
        return grad
    grad = grad.copy()
    U = _outward_unit(space, X[on])
    c = np.maximum(_inner(space, X[on], grad[on], U), 0.0)
    grad[on] -= c[:, None] * U
    return grad


def _riem_grad(space, X, partials):
    if space.hyperbolic:
        return partials * (X[:, 1] ** 2)[:, None]
    return partials


def _grad_norm(space, X, V):
    return math.sqrt(float(np.sum(_inner(space, X, V, V))))


def _ascend(X, A, space, w, radius, max_iters, step0, grad_tol):
    """One gradient-ascent run from ``X``; returns (X, value, trace, iterations, converged).

    Once the gradient criterion fires, up to POLISH_ITERS further steps are
    taken while they strictly increase the objective; in flat directions
    (far-apart non-edges) this carries points on to the ball boundary.
    """
    hyper = space.hyperbolic
    lam, logn = w.lam, math.log(A.shape[0])
    val, part, _ = _kernels.logistic_loglik_grad(X, A, lam, logn, hyper)
    trace = [val]
    step = step0
    converged = False
    polish = 0
    it = 0
    for it in range(1, max_iters + 1):
        grad = _riem_grad(space, X, part)
        # stationarity is judged on the tangent cone; the step itself is projected
        gnorm = _grad_norm(space, X, _tangent_cone(space, X, grad, radius))
        if gnorm < grad_tol:
            converged = True
            polish += 1
            if gnorm == 0.0 or polish > POLISH_ITERS:
                it -= 1
                break
        moved = False
        while step > MIN_STEP:
            Xn = project_to_ball(space, _retract(space, X, grad, step), radius)
            valn, partn, singular = _kernels.logistic_loglik_grad(Xn, A, lam, logn, hyper)
            if not singular and valn > val:
                X, val, part = Xn, valn, partn
                moved = True
                step *= 2.0
                break
            step *= 0.5
        if not moved:
            # no ascent at any representable step size: a numerical stationary point
            converged = True
            break
        trace.append(val)
    return X, val, trace, it, converged


def mle_embed(G: Graph, space: LatentSpace, w: LinkFunction, restarts: int = 8, max_iters: int = 2000,
              step0: float = 0.1, grad_tol: float = 1e-6, t_max: float = None, init: str = "mixed",
              rng_seed=None) -> EmbeddingResult:
    """Best-of-restarts local maximiser of the log-likelihood inside the support ball.

    ``init`` is ``mixed`` (restart 0 from graph MDS, the rest random-ball),
    ``random-ball`` or ``graph-mds``.  Ties within 1e-9 go to the lower restart index.
    """
    if w.kind != "logistic":
        raise UsageError("ML embedding needs a logistic link (hard threshold has zero gradient a.e.)")
    if restarts < 1:
        raise UsageError("restarts must be >= 1")
    n = G.n
    t_max = default_t_max(n) if t_max is None else float(t_max)
    radius = t_max / 2.0
    rng = as_rng(rng_seed)
    seeds = rng.spawn(restarts)
    A = np.ascontiguousarray(G.adjacency, dtype=np.int8)

    if n == 1:
        c = Configuration(space, space.origin[None, :])
        return EmbeddingResult(c, 0.0, 1, 0, True, [0.0], False, [0.0], 0)

    best = None
    objectives = []
    info = {}
    for r in range(restarts):
        if init == "mixed":
            strategy = "graph-mds" if r == 0 else "random-ball"
        else:
            strategy = init
        X0 = init_embedding(G, space, w, strategy, seeds[r], t_max, info).coords
        X, val, trace, iters, conv = _ascend(X0, A, space, w, radius, max_iters, step0, grad_tol)
        objectives.append(val)
        if not np.isfinite(val):
            continue
        if best is None or val > best[1] + 1e-9:
            best = (X, val, trace, iters, conv, r)
    if best is None:
        raise OptimizationError("no restart produced a finite objective")
    X, val, trace, iters, conv, r = best
    est = Configuration(space, X)
    at_boundary = bool(np.any(dist_to_origin(space, X) >= radius - BOUNDARY_TOL))
    return EmbeddingResult(
        estimate=est,
        objective=loglik(est, G, w),
        restarts_used=restarts,
        iterations=iters,
        converged=conv,
        objective_trace=trace,
        at_boundary=at_boundary,
        restart_objectives=objectives,
        best_restart=r,
        init_info=info,
    )
