"""Link functions w_n, their logits, and Bernoulli graph generation."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UnboundedLogitError, UsageError
from .geometry import Configuration, NodeDensity, as_rng, sample_density


@dataclass(frozen=True)
class LinkFunction:
    """``hard``: w_n(t) = 1{t <= ln n};  ``logistic``: w_n(t) = 1/(1 + exp(lam (t - ln n)))."""

    kind: str = "logistic"
    lam: float = 2.0

    def __post_init__(self):
        if self.kind not in ("hard", "logistic"):
            raise UsageError(f"unknown link kind {self.kind!r}")
        if self.kind == "logistic" and not self.lam > 0:
            raise UsageError("logistic link needs lam > 0")

    @classmethod
    def hard_threshold(cls) -> "LinkFunction":
        return cls("hard", 0.0)

    @classmethod
    def logistic(cls, lam: float) -> "LinkFunction":
        return cls("logistic", float(lam))

    def to_dict(self) -> dict:
        if self.kind == "hard":
            return {"kind": "hard"}
        return {"kind": "logistic", "lam": self.lam}

    @classmethod
    def from_dict(cls, d: dict) -> "LinkFunction":
        if d["kind"] == "hard":
            return cls.hard_threshold()
        return cls.logistic(d.get("lam", 2.0))


def _check_n(n):
    if n < 1:
        raise UsageError("node count must be >= 1")


def link_eval(w: LinkFunction, t, n: int):
    """Edge probability at distance ``t`` for an ``n``-node graph (vectorised over t)."""
    _check_n(n)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("distance must be non-negative")
    logn = math.log(n)
    if w.kind == "hard":
        out = (t <= logn).astype(float)
    else:
        # sigmoid(-z) in a form that never overflows
        z = w.lam * (t - logn)
        out = np.exp(-np.logaddexp(0.0, z))
    return float(out) if out.ndim == 0 else out


def link_logit(w: LinkFunction, t, n: int):
    """logit(w_n(t)) = lam (ln n - t), evaluated in closed form."""
    _check_n(n)
    if w.kind == "hard":
        raise UnboundedLogitError("the hard-threshold link has infinite logits")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("distance must be non-negative")
    out = w.lam * (math.log(n) - t)
    return float(out) if out.ndim == 0 else out


def logit_bound(w: LinkFunction, n: int, t_max: float) -> float:
    """sup over t in [0, t_max] of |logit w_n(t)|."""
    if w.kind == "hard":
        raise UnboundedLogitError("the hard-threshold link is not logit-bounded")
    _check_n(n)
    if t_max < 0:
        raise DomainError("t_max must be non-negative")
    logn = math.log(n)
    return w.lam * max(abs(logn), abs(logn - t_max))


def logit_bound_diagnostic(w: LinkFunction, t_max, n_values=None, warn: bool = True):
    """Tabulate v_n^2 n^3 and report whether it looks like it vanishes.

    ``t_max`` may be a number or a callable of n.  Returns ``(table, vanishing)``
    where ``table`` rows are ``(n, v_n, v_n^2 n^3)``.  The check is heuristic:
    the product must decrease over the last decade of n and end below 1e-3.
    """
    if n_values is None:
        n_values = np.unique(np.logspace(0.5, 4, 30).astype(int))
    rows = []
    for n in n_values:
        tm = t_max(n) if callable(t_max) else t_max
        v = logit_bound(w, int(n), tm)
        rows.append((int(n), v, v * v * float(n) ** 3))
    prods = np.array([r[2] for r in rows])
    tail = prods[len(prods) // 2:]
    vanishing = bool(np.all(np.diff(tail) <= 0) and tail[-1] < 1e-3)
    if not vanishing and warn:
        warnings.warn(
            f"v_n^2 n^3 does not vanish for {w} (last value {prods[-1]:.3g}); "
            "consistency guarantees need not apply",
            RuntimeWarning,
            stacklevel=2,
        )
    return rows, vanishing


class Graph:
    """Undirected simple graph stored as a symmetric 0/1 matrix with zero diagonal."""

    __slots__ = ("adjacency",)

    def __init__(self, adjacency):
        A = np.asarray(adjacency)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise UsageError("adjacency must be a square matrix")
        if not np.all((A == 0) | (A == 1)):
            raise UsageError("adjacency entries must be 0 or 1")
        A = A.astype(np.int8)
        if not np.array_equal(A, A.T):
            raise UsageError("adjacency must be symmetric")
        if np.any(np.diag(A)):
            raise UsageError("self-loops are not allowed")
        A.setflags(write=False)
        self.adjacency = A

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        if n < 1:
            raise UsageError("graph needs n >= 1")
        A = np.zeros((n, n), dtype=np.int8)
        for p, q in edges:
            if p == q:
                raise UsageError("self-loops are not allowed")
            A[p, q] = A[q, p] = 1
        return cls(A)

    def edges(self) -> list:
        """Sorted list of (p, q) with p < q."""
        iu, ju = np.nonzero(np.triu(self.adjacency, 1))
        return [(int(p), int(q)) for p, q in zip(iu, ju)]

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(int)

    def __eq__(self, other):
        return isinstance(other, Graph) and np.array_equal(self.adjacency, other.adjacency)

    def __repr__(self):
        return f"Graph(n={self.n}, edges={len(self.edges())})"


def edge_probabilities(c: Configuration, w: LinkFunction, n: int = None) -> np.ndarray:
    """Matrix of w_n(dist(x_p, x_q)) with zero diagonal; ``n`` defaults to |c|."""
    n = c.n if n is None else n
    P = link_eval(w, c.pairwise_distances(), n)
    P = np.atleast_2d(P)
    np.fill_diagonal(P, 0.0)
    return P


def sample_graph(P: np.ndarray, rng_seed=None) -> Graph:
    """Independent Bernoulli(P_pq) edges for p < q."""
    rng = as_rng(rng_seed)
    n = P.shape[0]
    iu, ju = np.triu_indices(n, 1)
    A = np.zeros((n, n), dtype=np.int8)
    A[iu, ju] = rng.random(iu.size) < P[iu, ju]
    return Graph(A | A.T)


def generate_graph(c: Configuration, w: LinkFunction, rng_seed=None) -> Graph:
    return sample_graph(edge_probabilities(c, w), rng_seed)


def generate_graph_iid(f: NodeDensity, n: int, w: LinkFunction, rng_seed=None):
    """Sample latent positions from ``f`` then a graph on them; returns (config, graph)."""
    if int(n) != n or n < 1:
        raise UsageError("generate_graph_iid needs n >= 1")
    rng = as_rng(rng_seed)
    c = sample_density(f, int(n), rng)
    return c, generate_graph(c, w, rng)
