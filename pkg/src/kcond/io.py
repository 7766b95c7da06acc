"""Text formats for graphs, colorings and decorated trees; JSON and CSV writers."""
import csv
import io as _io
import json
import math

import numpy as np

from .dtree import DecoratedTree
from .graphs import Coloring, Graph


def read_graph(path):
    """Line 1 "n m k", then m lines "u v" (0-based). Returns (Graph, k)."""
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 3:
            raise ValueError(f"{path}: first line must be 'n m k'")
        n, m, k = map(int, head)
        rows = [line.split() for line in fh if line.strip()]
    if len(rows) != m:
        raise ValueError(f"{path}: header announces {m} edges, found {len(rows)}")
    edges = np.array([[int(a), int(b)] for a, b in rows], dtype=np.int64).reshape(-1, 2)
    return Graph(n, edges), k


def write_graph(path, G, k):
    with open(path, "w") as fh:
        fh.write(f"{G.n} {G.m} {k}\n")
        for u, v in G.edges:
            fh.write(f"{u} {v}\n")


def read_coloring(path, k=None):
    with open(path) as fh:
        cols = [int(line) for line in fh if line.strip()]
    cols = np.array(cols, dtype=np.int64)
    if k is None:
        k = int(cols.max()) + 1 if len(cols) else 1
    return Coloring(cols, k)


def write_coloring(path, sigma):
    cols = sigma.colors if isinstance(sigma, Coloring) else np.asarray(sigma)
    with open(path, "w") as fh:
        fh.writelines(f"{int(c)}\n" for c in cols)


def format_tree(T):
    """Line 1 "n k root"; then per vertex "parent i ell-mask" (parent -1 at the root)."""
    lines = [f"{T.n} {T.k} {T.root}"]
    for v in range(T.n):
        lines.append(f"{int(T.parent[v])} {int(T.i[v])} {int(T.ell[v])}")
    return "\n".join(lines) + "\n"


def parse_tree(text, check=True):
    rows = [line.split() for line in text.strip().splitlines()]
    n, k, root = map(int, rows[0])
    body = [tuple(map(int, r)) for r in rows[1:n + 1]]
    if len(body) != n:
        raise ValueError(f"tree announces {n} vertices, found {len(body)}")
    T = DecoratedTree([b[0] for b in body], [b[1] for b in body], [b[2] for b in body], k, check)
    if T.root != root:
        raise ValueError(f"header root {root} does not match the parent array (root {T.root})")
    return T


def read_classes(path):
    """One canonical class code per non-empty line."""
    with open(path) as fh:
        return [line.strip() for line in fh if line.strip() and not line.startswith("#")]


class _Encoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        return super().default(o)


def _fmt17(x):
    if isinstance(x, float) and math.isfinite(x):
        return float(f"{x:.17g}")
    return x


def _round_floats(obj):
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round_floats(obj.tolist())
    if isinstance(obj, np.floating):
        return _fmt17(float(obj))
    return _fmt17(obj) if isinstance(obj, float) else obj


def dumps_json(obj):
    # Python's repr is the shortest round-tripping form; it never needs more
    # than 17 significant digits
    return json.dumps(_round_floats(obj), cls=_Encoder, sort_keys=True, indent=2, allow_nan=True)


def dumps_csv(header, rows, comments=None):
    buf = _io.StringIO()
    for c in comments or []:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{x:.17g}" if isinstance(x, float) else x for x in r])
    return buf.getvalue()
