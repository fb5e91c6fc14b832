"""Command-line entry point ``cls``.

Exit codes: 0 on success, 1 on usage errors (bad arguments, bad config,
unreadable files), 2 when an experiment or computation fails.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .alignment import align_configs, density_class_distance
from .bounds import bounds_table
from .density import GridSpec, kde
from .embedding import mle_embed
from .errors import ClsError, UsageError
from .experiments import KINDS, ExperimentSpec, run_experiment
from .geometry import LatentSpace, density_from_dict, sample_density
from .links import LinkFunction, generate_graph

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None


def _space(args, cfg) -> LatentSpace:
    if args.space is not None:
        if args.space == "halfplane":
            return LatentSpace.halfplane()
        return LatentSpace.euclidean(args.dim)
    return LatentSpace.from_dict(cfg.get("space", {"kind": "euclidean", "dim": args.dim}))


def _link(args, cfg) -> LinkFunction:
    if args.lam is not None:
        return LinkFunction.logistic(args.lam)
    return LinkFunction.from_dict(cfg.get("link", {"kind": "logistic", "lam": 2.0}))


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2))


def cmd_generate(args) -> int:
    cfg = _load_config(args.config)
    space = _space(args, cfg)
    if "density" in cfg:
        f = density_from_dict(cfg["density"])
    else:
        from .experiments import default_density
        f = default_density(space)
    n = args.n if args.n is not None else int(cfg.get("n", 50))
    rng = np.random.default_rng(args.seed)
    truth = sample_density(f, n, rng)
    G = generate_graph(truth, _link(args, cfg), rng)
    out = _out_dir(args)
    io.write_config(out / "truth.csv", truth)
    io.write_graph(out / "graph.txt", G)
    print(f"wrote {n} nodes, {len(G.edges())} edges to {out}")
    return EXIT_OK


def cmd_embed(args) -> int:
    cfg = _load_config(args.config)
    G = io.read_graph(args.graph)
    opts = dict(cfg.get("optimizer", {}))
    if args.restarts is not None:
        opts["restarts"] = args.restarts
    if args.max_iters is not None:
        opts["max_iters"] = args.max_iters
    res = mle_embed(G, _space(args, cfg), _link(args, cfg), rng_seed=args.seed, **opts)
    out = _out_dir(args)
    io.write_config(out / "estimate.csv", res.estimate)
    _write_json(out / "diagnostics.json", res.diagnostics())
    print(f"objective {res.objective!r} converged {res.converged}")
    return EXIT_OK


def cmd_align(args) -> int:
    x, y = io.read_config(args.x), io.read_config(args.y)
    iso, d = align_configs(x, y)
    out = _out_dir(args)
    _write_json(out / "alignment.json", {"distance": d, "isometry": iso.to_dict()})
    print(repr(d))
    return EXIT_OK


def cmd_estimate_density(args) -> int:
    pts = io.read_config(args.points)
    f_hat = kde(pts, args.bandwidth)
    out = _out_dir(args)
    result = {"density": f_hat.to_dict()}
    if args.against is not None:
        g = density_from_dict(_load_config(args.against))
        result["class_distance"] = density_class_distance(
            f_hat, g, grid_spec=GridSpec(points_per_axis=args.grid_points))
        print(repr(result["class_distance"]))
    _write_json(out / "density.json", result)
    return EXIT_OK


def cmd_bounds(args) -> int:
    rows = bounds_table(args.n, args.dim, args.B, args.v_n, args.eps)
    out = _out_dir(args)
    io.write_table_csv(out / "bounds.csv", rows)
    _write_json(out / "bounds.json", rows)
    for r in rows:
        print(r)
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _load_config(args.config)
    cfg["kind"] = args.kind
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.replicates is not None:
        cfg["replicates"] = args.replicates
    if args.n_grid is not None:
        cfg["n_grid"] = args.n_grid
    cfg["out"] = str(_out_dir(args))
    spec = ExperimentSpec.from_dict(cfg)
    result = run_experiment(spec)
    for row in result.summary:
        print(row)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cls", description="Latent-space network simulation and inference")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, seed_default=0):
        sp.add_argument("--config", help="JSON file mirroring ExperimentSpec fields")
        sp.add_argument("--seed", type=int, default=seed_default)
        sp.add_argument("--out", help="output directory (default: current)")
        sp.add_argument("--space", choices=["euclidean", "halfplane"])
        sp.add_argument("--dim", type=int, default=2)
        sp.add_argument("--lam", type=float, help="logistic link steepness")

    g = sub.add_parser("generate", help="sample latent positions and a graph")
    common(g)
    g.add_argument("--n", type=int)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("embed", help="maximum-likelihood embedding of a graph")
    common(e)
    e.add_argument("graph", help="edge list (.txt) or graph JSON")
    e.add_argument("--restarts", type=int)
    e.add_argument("--max-iters", type=int)
    e.set_defaults(func=cmd_embed)

    a = sub.add_parser("align", help="isometry-class distance between two configurations")
    a.add_argument("x")
    a.add_argument("y")
    a.add_argument("--out")
    a.set_defaults(func=cmd_align)

    d = sub.add_parser("estimate-density", help="kernel density estimate from a configuration")
    d.add_argument("points")
    d.add_argument("--bandwidth", type=float)
    d.add_argument("--against", help="JSON density to compare against up to isometry")
    d.add_argument("--grid-points", type=int, default=64)
    d.add_argument("--out")
    d.set_defaults(func=cmd_estimate_density)

    b = sub.add_parser("bounds", help="tabulate concentration and complexity bounds")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--dim", type=int, default=2)
    b.add_argument("--B", type=int, default=2)
    b.add_argument("--v-n", type=float, required=True)
    b.add_argument("--eps", type=float, nargs="+", required=True)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bounds)

    x = sub.add_parser("experiment", help="run a simulation experiment")
    x.add_argument("kind", choices=KINDS)
    x.add_argument("--config")
    x.add_argument("--seed", type=int)
    x.add_argument("--out")
    x.add_argument("--replicates", type=int)
    x.add_argument("--n-grid", type=int, nargs="+")
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
        return args.func(args)
    except UsageError as exc:
        print(f"cls: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, KeyError) as exc:
        print(f"cls: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ClsError as exc:
        print(f"cls: failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
