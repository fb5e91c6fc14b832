"""Log-likelihoods of configurations given graphs, their normalised and expected
versions, and the entropy + KL split of the expected normalised log-likelihood.

Pair weights of the normalised likelihood are 2^-(p+q) with 1-based node
labels, so the result depends on node order.  Inputs are used in the order
given.
"""
from __future__ import annotations

import csv
import math
import warnings

import numpy as np

from . import _kernels
from .errors import LogZeroWarning, SingularityError, UsageError
from .geometry import Configuration, LatentSpace
from .links import Graph, LinkFunction

GUARD_LO = 1e-300
GUARD_HI = 1.0 - 1e-16
LOG_WEIGHT_THRESHOLD = 50


class EdgeProbMatrix:
    """Symmetric matrix of edge probabilities pi_pq(1) with their logs.

    ``log_p1`` and ``log_p0`` hold log pi_pq(1) and log pi_pq(0).  When built
    from a configuration and a logistic link they are computed without ever
    forming 1 - w, so tiny tail probabilities keep full relative accuracy.
    """

    def __init__(self, prob, log_p1=None, log_p0=None):
        P = np.array(prob, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise UsageError("edge probability matrix must be square")
        if np.any((P < 0) | (P > 1)) or not np.all(np.isfinite(P)):
            raise UsageError("edge probabilities must lie in [0, 1]")
        if not np.array_equal(P, P.T):
            raise UsageError("edge probability matrix must be symmetric")
        np.fill_diagonal(P, 0.0)
        with np.errstate(divide="ignore"):
            self.log_p1 = np.log(P) if log_p1 is None else np.asarray(log_p1, dtype=float)
            self.log_p0 = np.log1p(-P) if log_p0 is None else np.asarray(log_p0, dtype=float)
        self.prob = P

    @property
    def n(self) -> int:
        return self.prob.shape[0]

    @classmethod
    def from_config(cls, c: Configuration, w: LinkFunction, n: int = None) -> "EdgeProbMatrix":
        n = c.n if n is None else n
        D = c.pairwise_distances()
        logn = math.log(n)
        if w.kind == "hard":
            P = (D <= logn).astype(float)
            np.fill_diagonal(P, 0.0)
            return cls(P)
        z = w.lam * (D - logn)
        log_p1 = -np.logaddexp(0.0, z)
        log_p0 = -np.logaddexp(0.0, -z)
        P = np.exp(log_p1)
        np.fill_diagonal(P, 0.0)
        return cls(P, log_p1, log_p0)


def _check(c: Configuration, G: Graph, space: LatentSpace = None):
    if space is not None and c.space != space:
        raise UsageError("configuration is not in the given space")
    if c.n != G.n:
        raise UsageError(f"configuration has {c.n} points but graph has {G.n} nodes")


def _upper(n):
    return np.triu_indices(n, 1)


def pair_weights(n: int) -> np.ndarray:
    """Weights 2^-(p+q) for p < q (1-based labels), row-major over the upper triangle."""
    iu, ju = _upper(n)
    return np.ldexp(1.0, -(iu + ju + 2))


def _guarded_logs(pi: EdgeProbMatrix):
    P = np.clip(pi.prob, GUARD_LO, GUARD_HI)
    return np.log(P), np.log1p(-P)


def _pair_terms(pi: EdgeProbMatrix, G: Graph, guard: bool):
    iu, ju = _upper(G.n)
    lp1, lp0 = _guarded_logs(pi) if guard else (pi.log_p1, pi.log_p0)
    g = G.adjacency[iu, ju].astype(bool)
    with np.errstate(invalid="ignore"):
        return np.where(g, lp1[iu, ju], lp0[iu, ju])


def _sum_terms(terms) -> float:
    if np.any(np.isneginf(terms)):
        warnings.warn("log(0) term in log-likelihood; returning -inf", LogZeroWarning, stacklevel=3)
        return -math.inf
    return math.fsum(terms.tolist())


def _weighted(terms, n: int):
    iu, ju = _upper(n)
    if n <= LOG_WEIGHT_THRESHOLD:
        return terms * np.ldexp(1.0, -(iu + ju + 2))
    # log-space product: w * t = -exp(-(p+q) ln 2 + log(-t)), t <= 0
    with np.errstate(divide="ignore"):
        logmag = -(iu + ju + 2) * math.log(2.0) + np.log(-terms)
    return -np.exp(logmag)


def loglik(c: Configuration, G: Graph, w: LinkFunction, space: LatentSpace = None, guard: bool = False) -> float:
    """Sum over edges of log w_n(dist) plus sum over non-edges of log(1 - w_n(dist))."""
    _check(c, G, space)
    if G.n == 1:
        return 0.0
    return _sum_terms(_pair_terms(EdgeProbMatrix.from_config(c, w), G, guard))


def loglik_norm(c: Configuration, G: Graph, w: LinkFunction, space: LatentSpace = None, guard: bool = False) -> float:
    """Normalised log-likelihood: pair terms weighted by 2^-(p+q)."""
    _check(c, G, space)
    if G.n == 1:
        return 0.0
    terms = _pair_terms(EdgeProbMatrix.from_config(c, w), G, guard)
    if np.any(np.isneginf(terms)):
        return _sum_terms(terms)
    return math.fsum(_weighted(terms, G.n).tolist())


def _riemannian(space: LatentSpace, X, partials):
    if space.hyperbolic:
        return partials * (X[:, 1] ** 2)[:, None]
    return partials


def loglik_grad(c: Configuration, G: Graph, w: LinkFunction, space: LatentSpace = None):
    """Value and Riemannian gradient (one tangent vector per node) of :func:`loglik`."""
    _check(c, G, space)
    if w.kind != "logistic":
        raise UsageError("gradients need a logistic link")
    val, partials, singular = _kernels.logistic_loglik_grad(
        c.coords, G.adjacency, w.lam, math.log(G.n), c.space.hyperbolic
    )
    if singular:
        raise SingularityError("coincident points: likelihood gradient is singular")
    return val, _riemannian(c.space, c.coords, partials)


def loglik_norm_grad(c: Configuration, G: Graph, w: LinkFunction, space: LatentSpace = None) -> np.ndarray:
    """Riemannian gradient of :func:`loglik_norm` with respect to each point."""
    _check(c, G, space)
    if w.kind != "logistic":
        raise UsageError("gradients need a logistic link")
    n, X = c.n, c.coords
    grad = np.zeros_like(X)
    if n == 1:
        return grad
    iu, ju = _upper(n)
    t = c.pairwise_distances()[iu, ju]
    if np.any(t < _kernels.SINGULAR_TOL):
        raise SingularityError("coincident points: likelihood gradient is singular")
    z = w.lam * (t - math.log(n))
    prob = np.exp(-np.logaddexp(0.0, z))
    g = G.adjacency[iu, ju]
    dterm = pair_weights(n) * w.lam * (prob - g)
    diff = X[iu] - X[ju]
    if c.space.hyperbolic:
        yi, yj = X[iu, 1], X[ju, 1]
        pq = yi * yj
        sq = np.einsum("ij,ij->i", diff, diff)
        k = dterm / np.sinh(t)
        gi = np.column_stack([k * diff[:, 0] / pq, k * (diff[:, 1] / pq - sq / (2 * yi * pq))])
        gj = np.column_stack([-k * diff[:, 0] / pq, k * (-diff[:, 1] / pq - sq / (2 * yj * pq))])
    else:
        gi = (dterm / t)[:, None] * diff
        gj = -gi
    np.add.at(grad, iu, gi)
    np.add.at(grad, ju, gj)
    return _riemannian(c.space, X, grad)


def _cross_terms(pi_star: EdgeProbMatrix, log_p1, log_p0):
    iu, ju = _upper(pi_star.n)
    ps1 = pi_star.prob[iu, ju]
    ps0 = 1.0 - ps1
    with np.errstate(invalid="ignore"):
        # 0 * log 0 counts as 0
        t1 = np.where(ps1 > 0, ps1 * log_p1[iu, ju], 0.0)
        t0 = np.where(ps0 > 0, ps0 * log_p0[iu, ju], 0.0)
    return t1 + t0


def expected_loglik_norm_probs(pi_star: EdgeProbMatrix, pi: EdgeProbMatrix) -> float:
    """Sum over p < q of 2^-(p+q) sum_a pi*_pq(a) log pi_pq(a)."""
    if pi_star.n != pi.n:
        raise UsageError("edge probability matrices differ in size")
    if pi.n == 1:
        return 0.0
    terms = _cross_terms(pi_star, pi.log_p1, pi.log_p0)
    if np.any(np.isneginf(terms)):
        warnings.warn("model puts zero mass where the truth does not", LogZeroWarning, stacklevel=2)
        return -math.inf
    return math.fsum((terms * pair_weights(pi.n)).tolist())


def expected_loglik_norm(c: Configuration, truth: EdgeProbMatrix, w: LinkFunction, space: LatentSpace = None) -> float:
    """Cross-entropy form of the normalised log-likelihood at configuration ``c``."""
    if space is not None and c.space != space:
        raise UsageError("configuration is not in the given space")
    if c.n != truth.n:
        raise UsageError("configuration and truth differ in size")
    return expected_loglik_norm_probs(truth, EdgeProbMatrix.from_config(c, w))


def entropy_kl_decompose(pi_star: EdgeProbMatrix, pi: EdgeProbMatrix):
    """Weighted Bernoulli entropy of ``pi_star`` and KL divergence D(pi_star || pi).

    ``-expected_loglik_norm_probs(pi_star, pi) == H + D`` up to round-off.
    """
    if pi_star.n != pi.n:
        raise UsageError("edge probability matrices differ in size")
    n = pi.n
    if n == 1:
        return 0.0, 0.0
    iu, ju = _upper(n)
    wts = pair_weights(n)
    neg_self = _cross_terms(pi_star, pi_star.log_p1, pi_star.log_p0)
    neg_cross = _cross_terms(pi_star, pi.log_p1, pi.log_p0)
    H = -math.fsum((wts * neg_self).tolist())
    if np.any(np.isneginf(neg_cross)):
        warnings.warn("KL divergence is infinite", LogZeroWarning, stacklevel=2)
        return H, math.inf
    D = math.fsum((wts * (neg_self - neg_cross)).tolist())
    return H, D


def pair_terms_table(c: Configuration, G: Graph, w: LinkFunction):
    """Rows (p, q, dist, prob, edge, term, weight) for every pair p < q."""
    _check(c, G)
    n = c.n
    iu, ju = _upper(n)
    pi = EdgeProbMatrix.from_config(c, w)
    terms = _pair_terms(pi, G, guard=False)
    D = c.pairwise_distances()
    return [
        (int(p), int(q), float(D[p, q]), float(pi.prob[p, q]), int(G.adjacency[p, q]), float(t), float(wt))
        for p, q, t, wt in zip(iu, ju, terms, pair_weights(n))
    ]


def dump_pair_terms(path, c: Configuration, G: Graph, w: LinkFunction):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p", "q", "dist", "prob", "edge", "term", "weight"])
        writer.writerows(pair_terms_table(c, G, w))
