"""Decorated trees: legal-coloring counts, root marginals, BP merges and the
Bethe free entropy."""
import math

import numpy as np

EXACT_MAX_VERTICES = 64


class BetheInconsistency(ValueError):
    """A logarithm in the Bethe formula received a non-positive argument."""


def mask_colors(mask):
    mask = int(mask)
    out = []
    c = 0
    while mask:
        if mask & 1:
            out.append(c)
        mask >>= 1
        c += 1
    return out


def colors_mask(colors):
    m = 0
    for c in colors:
        m |= 1 << int(c)
    return m


def popcount(mask):
    return bin(int(mask)).count("1")


class DecoratedTree:
    """Rooted tree given by a parent array (-1 at the root) with a type
    (i, ell) per vertex; ell is a color bitmask."""

    def __init__(self, parent, i, ell, k, check=True):
        self.parent = [int(p) for p in parent]
        self.i = [int(x) for x in i]
        self.ell = [int(x) for x in ell]
        self.k = int(k)
        n = len(self.parent)
        roots = [v for v in range(n) if self.parent[v] < 0]
        if n == 0 or len(roots) != 1:
            raise ValueError("tree needs exactly one root")
        self.root = roots[0]
        self.children = [[] for _ in range(n)]
        for v, p in enumerate(self.parent):
            if p >= 0:
                if p >= n:
                    raise ValueError("parent out of range")
                self.children[p].append(v)
        order = [self.root]
        for v in order:
            order.extend(self.children[v])
        if len(order) != n:
            raise ValueError("parent array contains a cycle")
        self.order = order
        if check:
            self.validate()

    @property
    def n(self):
        return len(self.parent)

    def validate(self, admissible=True):
        full = (1 << self.k) - 1
        for v in range(self.n):
            if not self.ell[v] or self.ell[v] & ~full:
                raise ValueError(f"vertex {v}: bad color set")
            if not (self.ell[v] >> self.i[v]) & 1:
                raise ValueError(f"vertex {v}: distinguished color not in its list")
        if admissible:
            for v, p in enumerate(self.parent):
                if p < 0:
                    continue
                if not self.ell[v] & self.ell[p]:
                    raise ValueError(f"edge {p}-{v}: disjoint lists")
                if popcount(self.ell[v]) < 2 or popcount(self.ell[p]) < 2:
                    raise ValueError(f"edge {p}-{v}: singleton list on an edge")

    def edges(self):
        return [(p, v) for v, p in enumerate(self.parent) if p >= 0]

    def __repr__(self):
        return f"DecoratedTree(n={self.n}, k={self.k})"


def single_vertex(i, ell, k):
    return DecoratedTree([-1], [i], [ell], k)


# ---------------------------------------------------------------- BP merges

def bp_merge(mus, k):
    """B[mu_1..mu_g]: normalized prod_j (1 - mu_j); uniform if degenerate."""
    mus = np.asarray(mus, dtype=float).reshape(-1, k)
    prod = np.prod(1.0 - mus, axis=0)
    s = prod.sum()
    if len(mus) == 0 or s == 0:
        return np.full(k, 1.0 / k)
    return prod / s


def bp_merge_restricted(ell, mus, k):
    """B_ell: like bp_merge but supported on the color set ell (bitmask)."""
    mus = np.asarray(mus, dtype=float).reshape(-1, k)
    on = np.zeros(k)
    on[mask_colors(ell)] = 1.0
    if not on.any():
        raise ValueError("ell must be non-empty")
    prod = on * np.prod(1.0 - mus, axis=0)
    s = prod.sum()
    if len(mus) == 0 or s == 0:
        return on / on.sum()
    return prod / s


# ---------------------------------------------------------------- counting

def _exact_down(T):
    """Exact count vectors N[v][c] of legal colorings of the subtree at v
    with v colored c."""
    N = [None] * T.n
    for v in reversed(T.order):
        vec = [0] * T.k
        for c in mask_colors(T.ell[v]):
            w = 1
            for u in T.children[v]:
                w *= N[u][-1] - N[u][c]
                if not w:
                    break
            vec[c] = w
        vec.append(sum(vec))  # total kept in the last slot
        N[v] = vec
    return N


def _float_down(T):
    """Log-space variant: normalized vectors p[v] and log totals z[v]."""
    k = T.k
    p = [None] * T.n
    z = [0.0] * T.n
    for v in reversed(T.order):
        on = np.zeros(k)
        on[mask_colors(T.ell[v])] = 1.0
        prod = on
        logs = 0.0
        for u in T.children[v]:
            prod = prod * (1.0 - p[u])
            logs += z[u]
            mx = prod.max()
            if mx == 0:
                break
            prod = prod / mx
            logs += math.log(mx)
        s = prod.sum()
        if s == 0:
            p[v] = np.zeros(k)
            z[v] = -math.inf
        else:
            p[v] = prod / s
            z[v] = logs + math.log(s)
    return p, z


def dp_count(T, exact=None):
    """(ln Z(T), root marginal). Exact integers for small trees."""
    if exact is None:
        exact = T.n <= EXACT_MAX_VERTICES
    if exact:
        N = _exact_down(T)
        tot = N[T.root][-1]
        if tot == 0:
            return -math.inf, np.zeros(T.k)
        marg = np.array([x / tot for x in N[T.root][:-1]])
        return math.log(tot), marg
    p, z = _float_down(T)
    return z[T.root], p[T.root]


def count_exact(T):
    return _exact_down(T)[T.root][-1]


def subtree_marginals(T):
    """Root marginal of every subtree T_v, as a (n, k) float array."""
    out = np.zeros((T.n, T.k))
    if T.n <= EXACT_MAX_VERTICES:
        N = _exact_down(T)
        for v in range(T.n):
            if N[v][-1]:
                out[v] = [x / N[v][-1] for x in N[v][:-1]]
    else:
        p, _ = _float_down(T)
        out[:] = p
    return out


def _exact_up(T, N):
    """U[v][c]: counts for the component of T - v containing parent(v),
    rooted at parent(v), with parent(v) colored c."""
    U = [None] * T.n
    for p in T.order:
        kids = T.children[p]
        cols = mask_colors(T.ell[p])
        for v in kids:
            vec = [0] * T.k
            for c in cols:
                w = 1
                for u in kids:
                    if u != v:
                        w *= N[u][-1] - N[u][c]
                if U[p] is not None:
                    w *= U[p][-1] - U[p][c]
                vec[c] = w
            vec.append(sum(vec))
            U[v] = vec
    return U


def _float_up(T, p_down):
    k = T.k
    U = [None] * T.n
    for p in T.order:
        kids = T.children[p]
        on = np.zeros(k)
        on[mask_colors(T.ell[p])] = 1.0
        base = on if U[p] is None else on * (1.0 - U[p])
        for v in kids:
            prod = base.copy()
            for u in kids:
                if u != v:
                    prod = prod * (1.0 - p_down[u])
                    mx = prod.max()
                    if mx > 0:
                        prod = prod / mx
            s = prod.sum()
            U[v] = prod / s if s > 0 else np.zeros(k)
    return U


def neighbor_marginals(T):
    """For each v, the root marginals of the components of T - v at the
    neighbors of v (children first, then the parent side)."""
    out = []
    if T.n <= EXACT_MAX_VERTICES:
        N = _exact_down(T)
        U = _exact_up(T, N)
        frac = lambda vec: np.array([x / vec[-1] for x in vec[:-1]]) if vec[-1] else np.zeros(T.k)
        down = [frac(x) for x in N]
        up = [None if x is None else frac(x) for x in U]
    else:
        down, _ = _float_down(T)
        up = _float_up(T, down)
    for v in range(T.n):
        mus = [down[u] for u in T.children[v]]
        if up[v] is not None:
            mus.append(up[v])
        out.append(mus)
    return out


def bethe_term(ell, mus, k):
    """F_ell(mu_1..mu_g) = F^v - F^e / 2, with F_ell() = ln|ell|."""
    cols = mask_colors(ell)
    if len(mus) == 0:
        return math.log(len(cols))
    M = np.asarray(mus, dtype=float).reshape(-1, k)[:, cols]
    one_minus = 1.0 - M
    arg_v = np.prod(one_minus, axis=0).sum()
    if not arg_v > 0:
        raise BetheInconsistency("vertex term: every color of ell is blocked")
    fe = 0.0
    g = len(M)
    for j in range(g):
        rest = np.prod(np.delete(one_minus, j, axis=0), axis=0)
        s = rest.sum()
        b = np.full(len(cols), 1.0 / len(cols)) if (g == 1 or s == 0) else rest / s
        arg = 1.0 - float(M[j] @ b)
        if not arg > 0:
            raise BetheInconsistency(f"edge term {j}: argument {arg}")
        fe += math.log(arg)
    return math.log(arg_v) - 0.5 * fe


def bethe_free_entropy(T):
    """sum_v F(T, theta, v); equals ln Z(T) on trees with a legal coloring."""
    total = 0.0
    for v, mus in enumerate(neighbor_marginals(T)):
        total += bethe_term(T.ell[v], mus, T.k)
    return total


# ---------------------------------------------------------------- forests

def forest_trees(n, edges, lists, k, types=None):
    """Split a forest into DecoratedTrees (rooted at the smallest vertex of
    each component). Returns a list of (tree, vertex ids)."""
    adj = [[] for _ in range(n)]
    for u, v in np.asarray(edges, dtype=np.int64).reshape(-1, 2).tolist():
        adj[u].append(v)
        adj[v].append(u)
    seen = [False] * n
    out = []
    for r in range(n):
        if seen[r]:
            continue
        verts, parent = [r], {r: -1}
        seen[r] = True
        for v in verts:
            for u in adj[v]:
                if not seen[u]:
                    seen[u] = True
                    parent[u] = v
                    verts.append(u)
                elif u != parent[v]:
                    if parent.get(u, None) != v:
                        raise ValueError("graph is not a forest")
        loc = {v: t for t, v in enumerate(verts)}
        par = [loc[parent[v]] if parent[v] >= 0 else -1 for v in verts]
        ii = [types[v] if types is not None else mask_colors(lists[v])[0] for v in verts]
        T = DecoratedTree(par, ii, [lists[v] for v in verts], k, check=False)
        out.append((T, verts))
    return out


def forest_count(G, lists, k):
    """Exact number of legal colorings of a forest with list masks."""
    total = 1
    for T, _ in forest_trees(G.n, G.edges, lists, k):
        total *= count_exact(T)
        if total == 0:
            break
    return total


def forest_log_count(n, edges, lists, k):
    total = 0.0
    for T, _ in forest_trees(n, edges, lists, k):
        lz, _ = dp_count(T)
        total += lz
    return total
