"""Random graph ensembles, colorings and exact small-instance oracles."""
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import gammaln, logsumexp

from .rng import as_generator

GENERAL_CAP = 25
POTTS_CAP = 20


class Graph:
    """Simple undirected graph on vertices 0..n-1.

    Edges are stored sorted with u < v. Directed edge 2j is u->v and 2j+1 is
    v->u for the j-th edge, so the reverse of a directed edge e is e ^ 1.
    """

    def __init__(self, n, edges=()):
        self.n = int(n)
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        e = np.sort(e, axis=1)
        if len(e):
            if e.min() < 0 or e.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loop")
            e = e[np.lexsort((e[:, 1], e[:, 0]))]
            if np.any(np.all(e[1:] == e[:-1], axis=1)):
                raise ValueError("duplicate edge")
        self.edges = e
        self._csr = None

    @property
    def m(self):
        return len(self.edges)

    def csr(self):
        """(indptr, nbr, dedge): neighbors of v are nbr[indptr[v]:indptr[v+1]],
        dedge holds the id of the directed edge nbr -> v."""
        if self._csr is None:
            m = self.m
            src = np.empty(2 * m, dtype=np.int64)
            dst = np.empty(2 * m, dtype=np.int64)
            src[0::2], dst[0::2] = self.edges[:, 0], self.edges[:, 1]
            src[1::2], dst[1::2] = self.edges[:, 1], self.edges[:, 0]
            order = np.argsort(dst, kind="stable")
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            np.cumsum(np.bincount(dst, minlength=self.n), out=indptr[1:])
            self._csr = (indptr, src[order], order)
        return self._csr

    def adjacency(self):
        indptr, nbr, _ = self.csr()
        return [nbr[indptr[v]:indptr[v + 1]] for v in range(self.n)]

    def degrees(self):
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


@dataclass
class Coloring:
    colors: np.ndarray
    k: int

    def __post_init__(self):
        self.colors = np.asarray(self.colors, dtype=np.int64)
        if len(self.colors) and (self.colors.min() < 0 or self.colors.max() >= self.k):
            raise ValueError("color out of range")

    def __len__(self):
        return len(self.colors)


def _colors(sigma):
    if isinstance(sigma, Coloring):
        return sigma.colors
    return np.asarray(sigma, dtype=np.int64)


# ---------------------------------------------------------------- sampling

def pair_index(u, v, n):
    u, v = np.minimum(u, v), np.maximum(u, v)
    return u * n - u * (u + 1) // 2 + (v - u - 1)


def pair_from_index(r, n):
    """Inverse of pair_index for lexicographically ordered pairs u < v."""
    r = np.asarray(r, dtype=np.int64)
    b = 2 * n - 1
    u = np.floor((b - np.sqrt(np.maximum(b * b - 8.0 * r, 0.0))) / 2).astype(np.int64)
    u = np.clip(u, 0, max(n - 2, 0))
    start = u * n - u * (u + 1) // 2
    # float rounding can be off by one in either direction
    for _ in range(2):
        hi = r >= start + (n - u - 1)
        u = u + hi
        start = u * n - u * (u + 1) // 2
        lo = r < start
        u = u - lo
        start = u * n - u * (u + 1) // 2
    return u, r - start + u + 1


def floyd_sample(N, m, rng):
    """Uniform m-subset of range(N) by Floyd's algorithm, returned sorted."""
    N, m = int(N), int(m)
    if m > N:
        raise ValueError("cannot draw more items than the population")
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    tops = np.arange(N - m, N, dtype=np.int64)
    draws = rng.integers(0, tops + 1)
    chosen = set()
    for j, t in zip(tops.tolist(), draws.tolist()):
        chosen.add(j if t in chosen else t)
    return np.sort(np.fromiter(chosen, dtype=np.int64, count=m))


def gen_gnp(n, p, seed=None):
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    rng = as_generator(seed, "gnp")
    N = n * (n - 1) // 2
    m = rng.binomial(N, p) if N else 0
    u, v = pair_from_index(floyd_sample(N, m, rng), n)
    return Graph(n, np.column_stack([u, v]))


def gen_gnm(n, m, seed=None):
    N = n * (n - 1) // 2
    if m > N:
        raise ValueError(f"m={m} exceeds C(n,2)={N}")
    rng = as_generator(seed, "gnm")
    u, v = pair_from_index(floyd_sample(N, m, rng), n)
    return Graph(n, np.column_stack([u, v]))


def _bichromatic_blocks(sigma, k):
    members = [np.flatnonzero(sigma == i) for i in range(k)]
    blocks = [(i, j) for i in range(k) for j in range(i + 1, k)]
    sizes = np.array([len(members[i]) * len(members[j]) for i, j in blocks], dtype=np.int64)
    return members, blocks, sizes


def _bichromatic_pairs(sigma, k, idx):
    members, blocks, sizes = _bichromatic_blocks(sigma, k)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    b = np.searchsorted(offsets, idx, side="right") - 1
    u = np.empty(len(idx), dtype=np.int64)
    v = np.empty(len(idx), dtype=np.int64)
    for t, (i, j) in enumerate(blocks):
        sel = b == t
        if not sel.any():
            continue
        a, c = np.divmod(idx[sel] - offsets[t], len(members[j]))
        u[sel], v[sel] = members[i][a], members[j][c]
    return u, v


def bichromatic_count(sigma, k):
    return int(_bichromatic_blocks(_colors(sigma), k)[2].sum())


def gen_planted_m(n, m, sigma, seed=None, k=None):
    sig = _colors(sigma)
    if k is None:
        k = sigma.k if isinstance(sigma, Coloring) else int(sig.max()) + 1
    if len(sig) != n:
        raise ValueError("coloring length differs from n")
    B = bichromatic_count(sig, k)
    if m > B:
        raise ValueError(f"m={m} exceeds the {B} bichromatic pairs")
    rng = as_generator(seed, "planted_m")
    u, v = _bichromatic_pairs(sig, k, floyd_sample(B, m, rng))
    return Graph(n, np.column_stack([u, v]))


def balanced_coloring(n, k, seed=None):
    """Uniformly shuffled coloring with class sizes floor(n/k) or ceil(n/k)."""
    rng = as_generator(seed, "balanced")
    return Coloring(rng.permutation(np.arange(n) % k), k)


def gen_planted_p(n, k, d, seed=None):
    """Planted model: sigma uniform, bichromatic pairs kept with p' = d'/n."""
    if k < 2 or d < 0:
        raise ValueError("need k >= 2 and d >= 0")
    p = d * k / (k - 1) / n
    if p > 1:
        raise ValueError(f"p' = {p} > 1")
    rng = as_generator(seed, "planted_p")
    sigma = rng.integers(0, k, n)
    B = bichromatic_count(sigma, k)
    m = rng.binomial(B, p) if B else 0
    u, v = _bichromatic_pairs(sigma, k, floyd_sample(B, m, rng))
    return Coloring(sigma, k), Graph(n, np.column_stack([u, v]))


def gen_random_tree(n, seed=None):
    """Uniform labeled tree on n vertices from a random Pruefer sequence."""
    rng = as_generator(seed, "tree")
    if n <= 1:
        return Graph(n)
    if n == 2:
        return Graph(2, [(0, 1)])
    seq = rng.integers(0, n, n - 2)
    deg = np.ones(n, dtype=np.int64)
    np.add.at(deg, seq, 1)
    edges = []
    for x in seq:
        leaf = int(np.flatnonzero(deg == 1)[0])
        edges.append((leaf, int(x)))
        deg[leaf] -= 1
        deg[x] -= 1
    u, v = np.flatnonzero(deg == 1)
    edges.append((int(u), int(v)))
    return Graph(n, edges)


def random_proper_coloring(G, k, seed=None):
    """Greedy BFS coloring with random choices; works on forests for k >= 2."""
    rng = as_generator(seed, "tree-coloring")
    adj = G.adjacency()
    col = np.full(G.n, -1, dtype=np.int64)
    for r in range(G.n):
        if col[r] >= 0:
            continue
        col[r] = rng.integers(k)
        queue = [r]
        for v in queue:
            for u in adj[v]:
                if col[u] < 0:
                    used = set(col[adj[u]][col[adj[u]] >= 0].tolist())
                    free = [c for c in range(k) if c not in used]
                    if not free:
                        raise ValueError("greedy coloring got stuck")
                    col[u] = free[int(rng.integers(len(free)))]
                    queue.append(int(u))
    return Coloring(col, k)


# ---------------------------------------------------------------- colorings

def class_sizes(sigma, k):
    return np.bincount(_colors(sigma), minlength=k)


def is_proper(G, sigma):
    s = _colors(sigma)
    return bool(np.all(s[G.edges[:, 0]] != s[G.edges[:, 1]]))


def monochrome_edges(G, sigma):
    s = _colors(sigma)
    return int(np.sum(s[G.edges[:, 0]] == s[G.edges[:, 1]]))


def overlap(sigma, tau, k):
    s, t = _colors(sigma), _colors(tau)
    if len(s) != len(t):
        raise ValueError("colorings have different lengths")
    if len(s) and max(s.max(), t.max()) >= k:
        raise ValueError("color out of range")
    rho = np.zeros((k, k))
    np.add.at(rho, (s, t), 1.0)
    return rho / len(s)


def forb(sigma, k=None):
    s = _colors(sigma)
    c = np.bincount(s, minlength=k or 0)
    return int(np.sum(c * (c - 1) // 2))


def log_prob_proper_gnm(sigma, n, m):
    N = n * (n - 1) // 2
    if m > N:
        raise ValueError("m exceeds C(n,2)")
    free = N - forb(sigma)
    if free < m:
        return -math.inf
    if N <= 10**5:
        return math.log(math.comb(free, m)) - math.log(math.comb(N, m))
    lc = lambda a, b: gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1)
    return float(lc(free, m) - lc(N, m))


def prob_proper_gnm(sigma, n, m):
    """Probability that sigma is proper in G(n, m)."""
    N = n * (n - 1) // 2
    free = N - forb(sigma)
    if N <= 10**5:
        if m > N:
            raise ValueError("m exceeds C(n,2)")
        if free < m:
            return 0.0
        return float(Fraction(math.comb(free, m), math.comb(N, m)))
    return math.exp(log_prob_proper_gnm(sigma, n, m))


# ---------------------------------------------------------------- exact counts

def _min_frontier_order(n, adj):
    placed = np.zeros(n, dtype=bool)
    remaining = [set(a.tolist()) for a in adj]
    order = []
    touched = set()
    for _ in range(n):
        cand = [v for v in touched if not placed[v]] or [v for v in range(n) if not placed[v]]
        # prefer vertices that close off frontier members
        best = min(cand, key=lambda v: (len(remaining[v]), v))
        order.append(best)
        placed[best] = True
        for u in adj[best]:
            remaining[u].discard(best)
            touched.add(int(u))
        touched.discard(best)
    return order


def _schedule(n, adj, order):
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    last = [max([pos[v]] + [pos[u] for u in adj[v]]) for v in range(n)]
    frontier = []
    steps = []
    for t, v in enumerate(order):
        idx = [frontier.index(u) for u in adj[v] if pos[u] < t]
        after = frontier + [v]
        keep = [i for i, u in enumerate(after) if last[u] > t]
        steps.append((v, idx, keep))
        frontier = [after[i] for i in keep]
    return steps


def count_list_colorings(n, edges, allowed):
    """Exact number of proper colorings with tau(v) in allowed[v].

    Frontier dynamic programming over a greedy vertex order; the state is
    the color tuple of placed vertices that still have unplaced neighbors.
    """
    G = edges if isinstance(edges, Graph) else Graph(n, edges)
    adj = G.adjacency()
    steps = _schedule(n, adj, _min_frontier_order(n, adj))
    states = {(): 1}
    for v, idx, keep in steps:
        nxt = {}
        colors = list(allowed[v])
        for s, w in states.items():
            for c in colors:
                if any(s[i] == c for i in idx):
                    continue
                full = s + (c,)
                key = tuple(full[i] for i in keep)
                nxt[key] = nxt.get(key, 0) + w
        states = nxt
        if not states:
            return 0
    return sum(states.values())


def _is_forest(G):
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components
    if G.m == 0:
        return True
    a = coo_matrix((np.ones(G.m), (G.edges[:, 0], G.edges[:, 1])), shape=(G.n, G.n))
    ncomp = connected_components(a, directed=False)[0]
    return G.m == G.n - ncomp


def count_colorings_exact(G, k, cap=GENERAL_CAP):
    """Exact number of proper k-colorings of G as a Python integer."""
    if _is_forest(G):
        from .dtree import forest_count
        return forest_count(G, [(1 << k) - 1] * G.n, k)
    if G.n > cap:
        raise ValueError(f"refusing exact count: n={G.n} exceeds cap {cap} for non-forests")
    return count_list_colorings(G.n, G, [range(k)] * G.n)


def log_count_colorings(G, k, cap=GENERAL_CAP):
    c = count_colorings_exact(G, k, cap)
    return math.log(c) if c > 0 else -math.inf


def set_partition_masks(n, k):
    """Monochromatic-pair masks of all set partitions of [n] into <= k blocks,
    with the number of colorings inducing each partition."""
    masks, mults = [], []
    a = [0] * n

    def rec(i, nb):
        if i == n:
            mask = 0
            for u in range(n):
                for v in range(u + 1, n):
                    if a[u] == a[v]:
                        mask |= 1 << int(pair_index(u, v, n))
            masks.append(mask)
            mults.append(math.perm(k, nb))
            return
        for c in range(min(nb + 1, k)):
            a[i] = c
            rec(i + 1, max(nb, c + 1))

    rec(0, 0)
    return masks, mults


def count_colorings_batch(n, k, pair_masks, chunk=20000):
    """Proper k-coloring counts for many graphs on n <= 11 vertices given as
    bitmasks over pair indices; exact (sum over set partitions)."""
    if n * (n - 1) // 2 > 63:
        raise ValueError("batch counter supports n <= 11")
    pm, mult = set_partition_masks(n, k)
    pm = np.array(pm, dtype=np.uint64)
    mult = np.array(mult, dtype=np.int64)
    pair_masks = np.asarray(pair_masks, dtype=np.uint64)
    out = np.empty(len(pair_masks), dtype=np.int64)
    for s in range(0, len(pair_masks), chunk):
        block = pair_masks[s:s + chunk, None] & pm[None, :]
        out[s:s + chunk] = (block == 0) @ mult
    return out


def potts_histogram(G, k, cap=POTTS_CAP):
    """c[h] = number of sigma in [k]^n with exactly h monochromatic edges."""
    if G.n > cap:
        raise ValueError(f"refusing Potts enumeration: n={G.n} exceeds cap {cap}")
    n = G.n
    adj = G.adjacency()
    steps = _schedule(n, adj, _min_frontier_order(n, adj))
    dtype = np.int64 if k ** n < 2**62 else object
    zero = np.zeros(G.m + 1, dtype=dtype)
    start = zero.copy()
    start[0] = 1
    states = {(): start}
    for v, idx, keep in steps:
        nxt = {}
        for s, w in states.items():
            for c in range(k):
                h = sum(1 for i in idx if s[i] == c)
                full = s + (c,)
                key = tuple(full[i] for i in keep)
                if key not in nxt:
                    nxt[key] = zero.copy()
                if h:
                    nxt[key][h:] += w[:-h]
                else:
                    nxt[key] += w
        states = nxt
    return sum(states.values())


def potts_partition(G, k, beta, cap=POTTS_CAP):
    """ln sum_sigma exp(-beta * H_G(sigma)), H_G = number of monochromatic edges."""
    return potts_from_histogram(potts_histogram(G, k, cap), beta)


def potts_from_histogram(c, beta):
    """ln Z_beta from a histogram of monochromatic-edge counts."""
    h = np.flatnonzero(c)
    logc = np.array([math.log(int(x)) for x in c[h]])
    return float(logsumexp(logc - beta * h))
