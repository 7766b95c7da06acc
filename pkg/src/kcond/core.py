"""The sigma-core of a colored graph, computed by peeling."""
from collections import deque
from dataclasses import dataclass

import numpy as np

from .graphs import _colors, is_proper

DEFAULT_THRESHOLD = 100


@dataclass
class CoreResult:
    members: np.ndarray  # bool per vertex
    threshold: int
    peel_order: list

    @property
    def size(self):
        return int(self.members.sum())


def color_counts(G, sigma, k, alive=None):
    """cnt[v, j] = number of neighbors u of v (alive, if given) with sigma(u) = j."""
    s = _colors(sigma)
    cnt = np.zeros((G.n, k), dtype=np.int64)
    if G.m == 0:
        return cnt
    u, v = G.edges[:, 0], G.edges[:, 1]
    if alive is not None:
        keep = alive[u] & alive[v]
        u, v = u[keep], v[keep]
    np.add.at(cnt, (u, s[v]), 1)
    np.add.at(cnt, (v, s[u]), 1)
    return cnt


def _violates(cnt_row, own, threshold):
    low = cnt_row < threshold
    low[own] = False
    return bool(low.any())


def core(G, sigma, threshold=DEFAULT_THRESHOLD, k=None):
    """Largest vertex set in which every vertex has at least `threshold`
    neighbors of each color other than its own inside the set."""
    s = _colors(sigma)
    if k is None:
        k = int(s.max()) + 1 if len(s) else 1
    if threshold < 1:
        raise ValueError("threshold must be at least 1")
    if not is_proper(G, s):
        raise ValueError("sigma is not a proper coloring of G")
    cnt = color_counts(G, s, k)
    low = cnt < threshold
    low[np.arange(G.n), s] = False
    bad = low.any(axis=1)
    alive = np.ones(G.n, dtype=bool)
    queued = bad.copy()
    queue = deque(np.flatnonzero(bad).tolist())
    adj = G.adjacency()
    order = []
    while queue:
        v = queue.popleft()
        alive[v] = False
        order.append(v)
        c = s[v]
        for u in adj[v]:
            if alive[u] and not queued[u]:
                cnt[u, c] -= 1
                if cnt[u, c] < threshold:
                    queued[u] = True
                    queue.append(int(u))
            elif alive[u]:
                cnt[u, c] -= 1
    return CoreResult(alive, int(threshold), order)


def has_core_property(G, sigma, subset, threshold, k):
    """Whether every vertex of `subset` has >= threshold neighbors of every
    other color inside `subset`."""
    s = _colors(sigma)
    mask = np.zeros(G.n, dtype=bool)
    mask[list(subset)] = True
    cnt = color_counts(G, s, k, alive=mask)
    for v in np.flatnonzero(mask):
        if _violates(cnt[v].copy(), s[v], threshold):
            return False
    return True
