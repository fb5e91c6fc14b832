"""Reading and writing graphs, configurations and density grids.

Floats are written with ``repr`` so every file round-trips bit-exactly.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import UsageError
from .geometry import Configuration, LatentSpace
from .links import Graph


# graphs: "# n <count>" header, then sorted "p q" lines, 0-indexed


def write_edge_list(path, G: Graph):
    lines = [f"# n {G.n}"] + [f"{p} {q}" for p, q in G.edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path) -> Graph:
    n = None
    edges = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "n":
                n = int(parts[1])
            continue
        p, q = map(int, line.split())
        edges.append((p, q))
    if n is None:
        n = 1 + max((max(e) for e in edges), default=0)
    return Graph.from_edges(n, edges)


def graph_to_json(G: Graph) -> dict:
    return {"n": G.n, "edges": [list(e) for e in G.edges()]}


def graph_from_json(d: dict) -> Graph:
    return Graph.from_edges(int(d["n"]), [tuple(e) for e in d["edges"]])


def write_graph(path, G: Graph):
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(graph_to_json(G)))
    else:
        write_edge_list(path, G)


def read_graph(path) -> Graph:
    path = Path(path)
    if path.suffix == ".json":
        return graph_from_json(json.loads(path.read_text()))
    return read_edge_list(path)


# configurations: CSV with a "# space <kind> <dim>" header, or JSON


def write_config_csv(path, c: Configuration):
    with open(path, "w", newline="") as fh:
        fh.write(f"# space {c.space.kind} {c.space.dim}\n")
        for row in c.coords:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_config_csv(path, space: LatentSpace = None) -> Configuration:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 3 and parts[0] == "space":
                    space = LatentSpace.from_dict({"kind": parts[1], "dim": int(parts[2])})
                continue
            rows.append([float(v) for v in line.split(",")])
    if not rows:
        raise UsageError(f"{path}: no points")
    if space is None:
        space = LatentSpace.euclidean(len(rows[0]))
    return Configuration(space, np.array(rows))


def config_to_json(c: Configuration) -> dict:
    return {"space": c.space.to_dict(), "points": c.coords.tolist()}


def config_from_json(d: dict) -> Configuration:
    return Configuration(LatentSpace.from_dict(d["space"]), np.array(d["points"], dtype=float))


def write_config(path, c: Configuration):
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(config_to_json(c)))
    else:
        write_config_csv(path, c)


def read_config(path) -> Configuration:
    path = Path(path)
    if path.suffix == ".json":
        return config_from_json(json.loads(path.read_text()))
    return read_config_csv(path)


def write_table_csv(path, rows: list, columns: list = None):
    if not rows:
        Path(path).write_text("")
        return
    columns = columns or list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
