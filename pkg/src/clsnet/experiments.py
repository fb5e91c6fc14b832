"""Simulation experiments: consistency of embeddings, densities and graph laws,
concentration of the normalised log-likelihood, and a misspecified SBM regime.

Every replicate draws from its own stream ``SeedSequence(seed, spawn_key=(i, r))``
for grid index ``i`` and replicate ``r``, so results do not depend on the
order (or process) in which replicates run.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
import platform
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__, _accel
from .alignment import align_configs, density_class_distance
from .density import GridSpec, kde
from .embedding import mle_embed
from .errors import ClsError, ExperimentFailure, UsageError
from .geometry import (
    GaussianEuclidean,
    HyperGaussian,
    LatentSpace,
    NodeDensity,
    density_from_dict,
    sample_density,
)
from .io import write_table_csv
from .likelihood import EdgeProbMatrix, expected_loglik_norm_probs, pair_weights
from .links import LinkFunction, generate_graph, link_eval, sample_graph

log = logging.getLogger(__name__)

KINDS = ("embed-consistency", "density-consistency", "graph-consistency", "concentration", "misspecified")
FAILURE_FRACTION = 0.2
MAX_GRAPH_TYPE_NODES = 6


@dataclass
class ExperimentSpec:
    kind: str
    space: LatentSpace
    link: LinkFunction
    density: NodeDensity = None
    n_grid: list = field(default_factory=lambda: [20, 50, 100, 200])
    replicates: int = 20
    seed: int = 0
    optimizer: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    out: str = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        self.n_grid = [int(n) for n in self.n_grid]
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise UsageError("n_grid must be non-empty and strictly increasing")
        if self.n_grid[0] < 1:
            raise UsageError("n_grid entries must be >= 1")
        if self.replicates < 1:
            raise UsageError("replicates must be >= 1")
        if self.density is None and self.kind != "misspecified":
            self.density = default_density(self.space)
        if self.density is not None and self.density.space != self.space:
            raise UsageError("density lives in a different space than the experiment")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "space": self.space.to_dict(),
            "link": self.link.to_dict(),
            "density": None if self.density is None else self.density.to_dict(),
            "n_grid": list(self.n_grid),
            "replicates": self.replicates,
            "seed": self.seed,
            "optimizer": dict(self.optimizer),
            "params": dict(self.params),
            "out": self.out,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        space = LatentSpace.from_dict(d.get("space", {"kind": "euclidean", "dim": 2}))
        dens = d.get("density")
        return cls(
            kind=d["kind"],
            space=space,
            link=LinkFunction.from_dict(d.get("link", {"kind": "logistic", "lam": 2.0})),
            density=None if dens is None else density_from_dict(dens),
            n_grid=d.get("n_grid", [20, 50, 100, 200]),
            replicates=int(d.get("replicates", 20)),
            seed=int(d.get("seed", 0)),
            optimizer=dict(d.get("optimizer", {})),
            params=dict(d.get("params", {})),
            out=d.get("out"),
        )


def default_density(space: LatentSpace) -> NodeDensity:
    if space.hyperbolic:
        return HyperGaussian([0.0, 1.0], 1.0)
    return GaussianEuclidean(np.zeros(space.dim), np.eye(space.dim))


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    metric: str
    records: list
    summary: list
    notes: list = field(default_factory=list)

    def medians(self, metric: str = None) -> dict:
        key = f"median_{metric or self.metric}"
        return {row["n"]: row[key] for row in self.summary}

    def manifest(self) -> dict:
        import numba
        import scipy

        return {
            "spec": self.spec.to_dict(),
            "metric": self.metric,
            "n_records": len(self.records),
            "notes": self.notes,
            "versions": {
                "clsnet": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "numba": numba.__version__,
                "backend": _accel.get_backend(),
            },
        }

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_table_csv(out / "records.csv", self.records)
        write_table_csv(out / "summary.csv", self.summary)
        (out / "manifest.json").write_text(json.dumps(self.manifest(), indent=2))


# --------------------------------------------------------------------------
# helpers


def replicate_rng(seed: int, n_index: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n_index, rep)))


def summarize(records: list, metrics: list) -> list:
    """Median and quartiles per n of each metric, over non-failed records."""
    rows = []
    for n in sorted({r["n"] for r in records}):
        sub = [r for r in records if r["n"] == n]
        ok = [r for r in sub if not r.get("failed")]
        row = {"n": n, "replicates": len(sub), "failures": len(sub) - len(ok)}
        for m in metrics:
            vals = np.array([r[m] for r in ok if r.get(m) is not None], dtype=float)
            if vals.size:
                q1, med, q3 = np.percentile(vals, [25, 50, 75])
            else:
                q1 = med = q3 = math.nan
            row.update({f"median_{m}": float(med), f"q1_{m}": float(q1), f"q3_{m}": float(q3)})
        rows.append(row)
    return rows


def _embed_options(spec: ExperimentSpec) -> dict:
    keys = ("restarts", "max_iters", "step0", "grad_tol", "t_max", "init")
    return {k: spec.optimizer[k] for k in keys if k in spec.optimizer}


def _map_replicates(spec: ExperimentSpec, fn) -> list:
    """Evaluate ``fn(n_index, n, rep)`` over the grid, in parallel if asked."""
    tasks = [(i, n, r) for i, n in enumerate(spec.n_grid) for r in range(spec.replicates)]
    n_jobs = int(spec.params.get("n_jobs", 1))
    if n_jobs == 1:
        return [fn(*t) for t in tasks]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=n_jobs)(delayed(fn)(*t) for t in tasks)


def _guarded(fn):
    """Turn library errors inside one replicate into a failed record."""
    def run(i, n, r):
        try:
            rec = fn(i, n, r)
            rec.setdefault("failed", False)
            return rec
        except ClsError as exc:
            log.warning("replicate n=%d r=%d failed: %s", n, r, exc)
            return {"n": n, "replicate": r, "failed": True, "error": str(exc)}
    return run


def _check_failures(records: list):
    failed = sum(bool(r.get("failed")) for r in records)
    if failed > FAILURE_FRACTION * len(records):
        raise ExperimentFailure(f"{failed} of {len(records)} replicates failed")


def _embed_truth(spec: ExperimentSpec, i: int, n: int, r: int):
    rng = replicate_rng(spec.seed, i, r)
    truth = sample_density(spec.density, n, rng)
    G = generate_graph(truth, spec.link, rng)
    res = mle_embed(G, spec.space, spec.link, rng_seed=rng, **_embed_options(spec))
    _, d = align_configs(truth, res.estimate)
    rec = {
        "n": n, "replicate": r,
        "aligned_error": d / n,
        "objective": res.objective,
        "converged": res.converged,
        "at_boundary": res.at_boundary,
        "iterations": res.iterations,
    }
    return rng, truth, G, res, rec


# --------------------------------------------------------------------------
# experiments


def run_embed_consistency(spec: ExperimentSpec) -> ExperimentResult:
    """Per-node aligned error of the ML embedding against the latent truth."""
    if spec.link.kind != "logistic":
        raise UsageError("embedding experiments need a logistic link")

    def one(i, n, r):
        return _embed_truth(spec, i, n, r)[4]

    records = _map_replicates(spec, _guarded(one))
    _check_failures(records)
    return ExperimentResult(spec, "aligned_error", records, summarize(records, ["aligned_error"]))


def _grid_spec(spec) -> GridSpec:
    return GridSpec(points_per_axis=int(spec.params.get("grid_points", 64)))


def run_density_consistency(spec: ExperimentSpec) -> ExperimentResult:
    """L2 class distance between the KDE of the embedding and the true density.

    Each record also carries the aligned embedding error and an oracle arm:
    the same KDE built on the true latent positions.
    """
    if spec.link.kind != "logistic":
        raise UsageError("embedding experiments need a logistic link")
    grid = _grid_spec(spec)

    def one(i, n, r):
        _, truth, _, res, rec = _embed_truth(spec, i, n, r)
        rec["l2_error"] = density_class_distance(kde(res.estimate), spec.density, spec.space, grid)
        rec["oracle_l2_error"] = density_class_distance(kde(truth), spec.density, spec.space, grid)
        rec["embedding_penalty"] = rec["l2_error"] - rec["oracle_l2_error"]
        return rec

    records = _map_replicates(spec, _guarded(one))
    _check_failures(records)
    metrics = ["l2_error", "oracle_l2_error", "embedding_penalty", "aligned_error"]
    return ExperimentResult(spec, "l2_error", records, summarize(records, metrics))


@lru_cache(maxsize=8)
def graph_type_table(m: int) -> np.ndarray:
    """Map every edge bitmask on m nodes to the smallest bitmask of its isomorphism class."""
    if m < 1 or m > MAX_GRAPH_TYPE_NODES:
        raise UsageError(f"graph types are enumerated for 1 <= m <= {MAX_GRAPH_TYPE_NODES}")
    pairs = list(itertools.combinations(range(m), 2))
    index = {p: k for k, p in enumerate(pairs)}
    masks = np.arange(1 << len(pairs), dtype=np.int64)
    bits = (masks[:, None] >> np.arange(len(pairs))) & 1
    best = masks.copy()
    for perm in itertools.permutations(range(m)):
        target = [index[tuple(sorted((perm[p], perm[q])))] for p, q in pairs]
        permuted = (bits << np.array(target, dtype=np.int64)).sum(axis=1)
        np.minimum(best, permuted, out=best)
    return best


def graph_type_distribution(f: NodeDensity, m: int, w: LinkFunction, n_draws: int, rng) -> np.ndarray:
    """Empirical law of the isomorphism type of graph_m(f) over ``n_draws`` draws.

    Returned as a probability vector indexed by canonical bitmask.
    """
    table = graph_type_table(m)
    if m == 1:
        out = np.zeros(table.size)
        out[0] = 1.0
        return out
    pts = sample_density(f, n_draws * m, rng).coords.reshape(n_draws, m, -1)
    iu, ju = np.triu_indices(m, 1)
    diff = pts[:, iu, :] - pts[:, ju, :]
    sq = np.einsum("dkc,dkc->dk", diff, diff)
    if f.space.hyperbolic:
        t = 2.0 * np.arcsinh(np.sqrt(sq / (4.0 * pts[:, iu, 1] * pts[:, ju, 1])))
    else:
        t = np.sqrt(sq)
    edges = rng.random(t.shape) < link_eval(w, t, m)
    masks = (edges.astype(np.int64) << np.arange(iu.size)).sum(axis=1)
    counts = np.bincount(table[masks], minlength=table.size)
    return counts / n_draws


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())


def graph_law_tv(f: NodeDensity, g: NodeDensity, m: int, w: LinkFunction, n_draws: int, rng) -> float:
    return total_variation(
        graph_type_distribution(f, m, w, n_draws, rng),
        graph_type_distribution(g, m, w, n_draws, rng),
    )


def run_graph_consistency(spec: ExperimentSpec, m: int = None) -> ExperimentResult:
    """TV distance between graph-type laws of graph_m(KDE of embedding) and graph_m(f)."""
    m = int(spec.params.get("m", 4) if m is None else m)
    if m > MAX_GRAPH_TYPE_NODES:
        raise UsageError(f"m must be at most {MAX_GRAPH_TYPE_NODES}")
    graph_type_table(m)
    n_draws = int(spec.params.get("n_draws", 10_000))

    def one(i, n, r):
        rng, truth, _, res, rec = _embed_truth(spec, i, n, r)
        rec["tv"] = graph_law_tv(kde(res.estimate), spec.density, m, spec.link, n_draws, rng)
        rec["oracle_tv"] = graph_law_tv(kde(truth), spec.density, m, spec.link, n_draws, rng)
        return rec

    records = _map_replicates(spec, _guarded(one))
    _check_failures(records)
    return ExperimentResult(spec, "tv", records, summarize(records, ["tv", "oracle_tv", "aligned_error"]),
                            notes=[f"graph types on m={m} nodes, {n_draws} draws per law"])


def normalized_loglik_draws(pi_star: EdgeProbMatrix, pi: EdgeProbMatrix, graphs: np.ndarray) -> np.ndarray:
    """Normalised log-likelihood under ``pi`` of each upper-triangle edge vector in ``graphs``."""
    n = pi.n
    iu, ju = np.triu_indices(n, 1)
    wts = pair_weights(n)
    base = math.fsum((wts * pi.log_p0[iu, ju]).tolist())
    slope = wts * (pi.log_p1[iu, ju] - pi.log_p0[iu, ju])
    return base + graphs @ slope


def _auto_eps(denom: float, targets=(0.9, 0.3, 0.03)) -> list:
    # pair bound 2 exp(-eps^2 / denom) equals each target
    return [math.sqrt(denom * math.log(2.0 / t)) for t in targets]


def run_concentration(spec: ExperimentSpec, eps=None) -> ExperimentResult:
    """Deviation frequency of the normalised log-likelihood at a fixed truth.

    For each n one truth is drawn; ``replicates`` graphs are drawn from it and
    |l_norm(x*) - E l_norm(x*)| compared with each eps.  Summary rows report
    the frequency, its binomial sigma and both McDiarmid bounds.
    """
    from .bounds import mcdiarmid_pair_bound, mcdiarmid_uniform_bound, pair_logit_variance
    from .links import logit_bound

    eps = spec.params.get("eps") if eps is None else eps
    records, summary = [], []
    for i, n in enumerate(spec.n_grid):
        if n < 2:
            raise UsageError("concentration needs n >= 2")
        rng = replicate_rng(spec.seed, i, 0)
        truth = sample_density(spec.density, n, rng)
        pi = EdgeProbMatrix.from_config(truth, spec.link)
        expected = expected_loglik_norm_probs(pi, pi)
        denom = pair_logit_variance(truth, spec.link)
        eps_n = list(eps) if eps is not None else _auto_eps(max(denom, 1e-300))
        iu, ju = np.triu_indices(n, 1)
        draws = (rng.random((spec.replicates, iu.size)) < pi.prob[iu, ju]).astype(float)
        dev = np.abs(normalized_loglik_draws(pi, pi, draws) - expected)
        for r in range(spec.replicates):
            rec = {"n": n, "replicate": r, "deviation": float(dev[r])}
            for k, e in enumerate(eps_n):
                rec[f"exceeds_{k}"] = bool(dev[r] > e)
            records.append(rec)
        D = truth.pairwise_distances()
        v_n = max(logit_bound(spec.link, n, float(D.max())), 1e-300)
        for k, e in enumerate(eps_n):
            freq = float(np.mean(dev > e))
            pair_b = mcdiarmid_pair_bound(truth, spec.link, n, e)
            unif_b = mcdiarmid_uniform_bound(n, v_n, e)
            summary.append({
                "n": n, "eps": e, "frequency": freq,
                "sigma": math.sqrt(max(freq * (1 - freq), 1.0 / spec.replicates) / spec.replicates),
                "pair_bound": pair_b.value, "uniform_bound": unif_b.value,
                "pair_variance": denom, "v_n": v_n, "draws": spec.replicates,
            })
    return ExperimentResult(spec, "deviation", records, summary)


def sbm_probabilities(labels: np.ndarray, p_in: float, p_out: float) -> np.ndarray:
    P = np.where(labels[:, None] == labels[None, :], p_in, p_out).astype(float)
    np.fill_diagonal(P, 0.0)
    return P


def run_misspecified(spec: ExperimentSpec) -> ExperimentResult:
    """Embed graphs from a two-block SBM and measure replicate-to-replicate stability.

    Block labels are fixed per n (first half block 0), so replicate estimates
    share node identities and their class distance is meaningful.  Neither
    latent space is compact; the optimizer's support ball stands in.
    """
    if spec.link.kind != "logistic":
        raise UsageError("embedding experiments need a logistic link")
    p_in = float(spec.params.get("p_in", 0.8))
    p_out = float(spec.params.get("p_out", 0.1))

    def one(i, n, r):
        rng = replicate_rng(spec.seed, i, r)
        labels = (np.arange(n) >= n // 2).astype(int)
        G = sample_graph(sbm_probabilities(labels, p_in, p_out), rng)
        res = mle_embed(G, spec.space, spec.link, rng_seed=rng, **_embed_options(spec))
        D = res.estimate.pairwise_distances()
        iu, ju = np.triu_indices(n, 1)
        same = labels[iu] == labels[ju]
        return {
            "n": n, "replicate": r, "objective": res.objective,
            "within_block": float(np.median(D[iu, ju][same])) if same.any() else math.nan,
            "between_block": float(np.median(D[iu, ju][~same])) if (~same).any() else math.nan,
            "estimate": res.estimate,
        }

    records = _map_replicates(spec, _guarded(one))
    _check_failures(records)
    for n in spec.n_grid:
        sub = [r for r in records if r["n"] == n and not r.get("failed")]
        for a in sub:
            others = [align_configs(a["estimate"], b["estimate"])[1] / n for b in sub if b is not a]
            a["stability"] = float(np.mean(others)) if others else 0.0
    for r in records:
        r.pop("estimate", None)
    notes = ["latent spaces are not compact; the support ball of the optimizer stands in for compactness"]
    return ExperimentResult(spec, "stability", records,
                            summarize(records, ["stability", "within_block", "between_block", "objective"]), notes)


RUNNERS = {
    "embed-consistency": run_embed_consistency,
    "density-consistency": run_density_consistency,
    "graph-consistency": run_graph_consistency,
    "concentration": run_concentration,
    "misspecified": run_misspecified,
}


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    result = RUNNERS[spec.kind](spec)
    if spec.out:
        result.write(spec.out)
    return result
