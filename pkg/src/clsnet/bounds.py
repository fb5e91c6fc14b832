"""Closed-form concentration and complexity bounds for normalised log-likelihoods.

All exponentials are formed in log space; functions returning probabilities
give the raw (possibly > 1) value alongside a clipped one where noted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .geometry import Configuration
from .likelihood import pair_weights
from .links import LinkFunction, link_logit

LOG2_2_OVER_LN2 = math.log2(2.0 / math.log(2.0))


@dataclass(frozen=True)
class BoundValue:
    """A bound held as its natural log; ``value`` is inf when not representable."""

    log_value: float

    @property
    def value(self) -> float:
        if self.log_value > 709.0:
            return math.inf
        return math.exp(self.log_value)

    @property
    def clipped(self) -> float:
        return min(1.0, self.value)


def mcdiarmid_uniform_bound(n: int, v_n: float, eps: float) -> BoundValue:
    """2 exp(-2 eps^2 / (n (n-1) v_n^2)) for a logit bound v_n."""
    if n < 2:
        raise UsageError("need n >= 2")
    if not v_n > 0 or not eps > 0:
        raise UsageError("v_n and eps must be positive")
    return BoundValue(math.log(2.0) - 2.0 * eps * eps / (n * (n - 1) * v_n * v_n))


def pair_logit_variance(c: Configuration, w: LinkFunction, n: int = None) -> float:
    """sum_{p<q} 4^-(p+q) lambda_n(x_p, x_q)^2, with 1-based labels."""
    n = c.n if n is None else n
    D = c.pairwise_distances()
    iu, ju = np.triu_indices(c.n, 1)
    lam = link_logit(w, D[iu, ju], n)
    wts = pair_weights(c.n)
    return math.fsum((wts * wts * np.square(lam)).tolist())


def mcdiarmid_pair_bound(c: Configuration, w: LinkFunction, n: int, eps: float) -> BoundValue:
    """2 exp(-eps^2 / sum_{p<q} 4^-(p+q) lambda_n^2).

    When every logit vanishes the normalised log-likelihood does not depend on
    the graph, so the deviation probability is 0 (log value -inf).
    """
    if not eps > 0:
        raise UsageError("eps must be positive")
    denom = pair_logit_variance(c, w, n)
    if denom == 0.0:
        return BoundValue(-math.inf)
    return BoundValue(math.log(2.0) - eps * eps / denom)


def pseudo_dim_bound(n: int, dim: int, B: int = 2) -> float:
    """2 log2 B + 2 n dim log2(2 / ln 2)."""
    if n < 1 or dim < 1 or B < 1:
        raise UsageError("n, dim and B must be >= 1")
    return 2.0 * math.log2(B) + 2.0 * n * dim * LOG2_2_OVER_LN2


def covering_number_bound(eps: float, pdim: float) -> BoundValue:
    """L1 covering number bound e (v + 1) (2e / eps)^v for pseudo-dimension v."""
    if not 0 < eps < 2 * math.e:
        raise UsageError("eps must lie in (0, 2e)")
    if pdim < 0:
        raise UsageError("pseudo-dimension must be non-negative")
    return BoundValue(1.0 + math.log(pdim + 1.0) + pdim * math.log(2.0 * math.e / eps))


def growth_function_bound(m: int, d: int, B: int = 2) -> float:
    """B (e m / d)^d."""
    if m < d or d < 1:
        raise UsageError("need m >= d >= 1")
    return B * (math.e * m / d) ** d


def uniform_deviation_bound(n: int, dim: int, B: int, v_n: float, eps: float) -> BoundValue:
    """4 N_1(eps / 16) exp(-eps^2 / (8 n (n-1) v_n^2)), N_1 from the pseudo-dimension."""
    if n < 2:
        raise UsageError("need n >= 2")
    if not v_n > 0:
        raise UsageError("v_n must be positive")
    cover = covering_number_bound(eps / 16.0, pseudo_dim_bound(n, dim, B))
    return BoundValue(math.log(4.0) + cover.log_value - eps * eps / (8.0 * n * (n - 1) * v_n * v_n))


def bounds_table(n: int, dim: int, B: int, v_n: float, eps_values) -> list:
    """One row per eps with every calculator's raw and clipped value."""
    pdim = pseudo_dim_bound(n, dim, B)
    rows = []
    for eps in eps_values:
        mu = mcdiarmid_uniform_bound(n, v_n, eps)
        row = {
            "n": n, "dim": dim, "B": B, "v_n": v_n, "eps": eps,
            "pseudo_dim": pdim,
            "mcdiarmid_uniform": mu.value, "mcdiarmid_uniform_clipped": mu.clipped,
        }
        if eps / 16.0 < 2 * math.e:
            cov = covering_number_bound(eps / 16.0, pdim)
            ud = uniform_deviation_bound(n, dim, B, v_n, eps)
            row.update({
                "log_covering_number": cov.log_value,
                "log_uniform_deviation": ud.log_value,
                "uniform_deviation_clipped": ud.clipped,
            })
        rows.append(row)
    return rows
