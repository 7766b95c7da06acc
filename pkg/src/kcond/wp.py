"""Warning Propagation on a colored graph and the reduced decorated graphs."""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components

from . import dtree
from .core import DEFAULT_THRESHOLD, core
from .graphs import Graph, _colors, count_list_colorings, is_proper

NONTREE_CAP = 30


def popcount_array(x):
    x = np.asarray(x, dtype=np.uint64)
    out = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        out += (x & np.uint64(1)).astype(np.int64)
        x = x >> np.uint64(1)
    return out


@dataclass
class WPResult:
    messages: np.ndarray  # final k-bit mask per directed edge
    lists: np.ndarray  # L(v) (planted, union over rounds) or L'(v) (core, intersection)
    rounds: int  # first round t with mu(t) equal to an earlier state
    variant: str
    threshold: int = 0
    cycle: bool = False  # state repeated without reaching a fixed point
    history: list = field(default_factory=list)  # L(v, t) for t = 0..rounds-1
    messages_history: list = field(default_factory=list)
    core_members: np.ndarray = None
    period_start: int = 0

    def lists_at(self, t):
        return self.history[min(t, len(self.history) - 1)]


def _bits(msg, k):
    return ((msg[:, None] >> np.arange(k, dtype=np.uint64)[None, :]) & np.uint64(1)).astype(np.int32)


def _pack(bits, k):
    w = np.uint64(1) << np.arange(k, dtype=np.uint64)
    return (bits.astype(np.uint64) * w[None, :]).sum(axis=1, dtype=np.uint64)


def _endpoints(G):
    src = np.empty(2 * G.m, dtype=np.int64)
    dst = np.empty(2 * G.m, dtype=np.int64)
    src[0::2], src[1::2] = G.edges[:, 0], G.edges[:, 1]
    dst[0::2], dst[1::2] = G.edges[:, 1], G.edges[:, 0]
    return src, dst


def _incidence(G, dst):
    """Sparse n x 2m matrix summing messages into their target vertex."""
    return csr_matrix((np.ones(len(dst), dtype=np.int32), (dst, np.arange(len(dst)))),
                      shape=(G.n, len(dst)))


def _lists_from_counts(cnt, k):
    return _pack(cnt == 0, k)


def _single_colors(msg):
    """Color index of each message with at most one bit set (-1 if empty),
    or None if some message has several bits."""
    nz = msg != 0
    if np.any(msg[nz] & (msg[nz] - np.uint64(1))):
        return None
    col = np.full(len(msg), -1, dtype=np.int64)
    col[nz] = np.log2(msg[nz].astype(np.float64)).astype(np.int64)  # exact for powers of two
    return col


def _step_single(G, col, k, src, dst):
    """wp_step for messages with at most one bit each: per-vertex warning
    counts are a bincount, and excluding the reverse message can only
    un-warn that message's color."""
    n = G.n
    nz = col >= 0
    cnt = np.bincount(dst[nz] * k + col[nz], minlength=n * k).reshape(n, k)
    nmiss_v = (cnt == 0).sum(axis=1)
    only = np.argmax(cnt == 0, axis=1)  # the missing color where nmiss_v == 1
    rc = col.reshape(-1, 2)[:, ::-1].reshape(-1)  # message w -> v for edge v -> w
    drop = np.zeros(len(col), dtype=bool)
    has = rc >= 0
    drop[has] = cnt[src[has], rc[has]] == 1
    nm = nmiss_v[src] + drop
    one = np.uint64(1)
    new = np.zeros(len(col), dtype=np.uint64)
    a = (nm == 1) & ~drop
    new[a] = one << only[src[a]].astype(np.uint64)
    b = (nm == 1) & drop
    new[b] = one << rc[b].astype(np.uint64)
    new[nm == 0] = np.uint64((1 << k) - 1)
    return new, _lists_from_counts(cnt, k)


def wp_step(G, msg, k, _aux=None):
    """One synchronous round of the update
    mu_{v->w}(i, t+1) = prod_{j != i} max_{u in N(v)-w} mu_{u->v}(j, t).
    Returns (new messages, lists L(., t) of the current messages)."""
    src, dst, inc = _aux if _aux is not None else (*_endpoints(G), None)
    col = _single_colors(msg)
    if col is not None:
        return _step_single(G, col, k, src, dst)
    if inc is None:
        inc = _incidence(G, dst)
    bits = _bits(msg, k)
    cnt = np.asarray(inc @ bits)
    rev = bits.reshape(-1, 2, k)[:, ::-1].reshape(-1, k)  # message w -> v for edge v -> w
    warned = (cnt[src] - rev) > 0
    missing = ~warned
    nmiss = missing.sum(axis=1)
    full = np.uint64((1 << k) - 1)
    new = np.where(nmiss == 0, full, np.where(nmiss == 1, _pack(missing, k), np.uint64(0)))
    return new.astype(np.uint64), _lists_from_counts(cnt, k)


def wp_step_bits(G, msg, k):
    """Reference implementation of wp_step on the full bit matrix."""
    src, dst = _endpoints(G)
    bits = _bits(msg, k)
    cnt = np.asarray(_incidence(G, dst) @ bits)
    rev = bits.reshape(-1, 2, k)[:, ::-1].reshape(-1, k)
    missing = ~((cnt[src] - rev) > 0)
    nmiss = missing.sum(axis=1)
    full = np.uint64((1 << k) - 1)
    new = np.where(nmiss == 0, full, np.where(nmiss == 1, _pack(missing, k), np.uint64(0)))
    return new.astype(np.uint64), _lists_from_counts(cnt, k)


def wp_run(G, sigma, k, variant="planted", threshold=DEFAULT_THRESHOLD, max_rounds=None,
           keep_messages=False):
    """Run WP until the message state repeats. Planted variant: every vertex
    initially warns about its own color and L(v) is the union of L(v, t)
    over the visited rounds. Core variant: only core vertices warn at t=0 and
    L'(v) is the intersection of L'(v, t)."""
    s = _colors(sigma)
    if not is_proper(G, s):
        raise ValueError("sigma is not a proper coloring of G")
    own = (np.uint64(1) << s.astype(np.uint64))
    src, dst = _endpoints(G)
    aux = (src, dst, _incidence(G, dst))
    members = None
    if variant == "planted":
        msg = own[src].copy()
    elif variant == "core":
        members = core(G, s, threshold, k).members
        msg = np.where(members[src], own[src], np.uint64(0)).astype(np.uint64)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    if max_rounds is None:
        max_rounds = 2 * G.m * k + 2
    seen = {}
    history, mhist = [], []
    cycle = False
    t = 0
    while True:
        key = msg.tobytes()
        if key in seen:
            cycle = seen[key] != t - 1
            break
        seen[key] = t
        if keep_messages:
            mhist.append(msg.copy())
        new, lists_t = wp_step(G, msg, k, aux)
        history.append(lists_t)
        msg = new
        t += 1
        if t > max_rounds:
            raise RuntimeError("WP did not repeat a state within the round limit")
    start = seen[msg.tobytes()]
    # rounds 0..t-1 cover the pre-period and one full period
    visited = history
    if variant == "planted":
        lists = np.bitwise_or.reduce(np.array(visited), axis=0)
    else:
        lists = np.bitwise_and.reduce(np.array(visited), axis=0)
    res = WPResult(messages=msg, lists=lists.astype(np.uint64), rounds=t, variant=variant,
                   threshold=int(threshold) if variant == "core" else 0, cycle=cycle,
                   history=history, messages_history=mhist, core_members=members,
                   period_start=start)
    return res


# ---------------------------------------------------------------- reduced graphs

@dataclass
class ReducedGraph:
    graph: Graph
    sigma: np.ndarray
    lists: np.ndarray
    k: int
    comp: np.ndarray
    ncomp: int

    def components(self):
        order = np.argsort(self.comp, kind="stable")
        bounds = np.flatnonzero(np.diff(self.comp[order])) + 1
        return np.split(order, bounds)


def reduced_graph(G, sigma, lists, k, mode="limit", t=None):
    """Drop edges whose endpoint lists are disjoint; in round mode also drop
    edges at vertices with |L(., t)| < 2 and decorate with L(., t)."""
    s = _colors(sigma)
    if isinstance(lists, WPResult):
        L = lists.lists_at(t) if mode == "round" else lists.lists
    else:
        L = np.asarray(lists, dtype=np.uint64)
    if mode == "round" and t is None and not isinstance(lists, WPResult):
        raise ValueError("round mode needs t or a WPResult")
    u, v = G.edges[:, 0], G.edges[:, 1]
    keep = (L[u] & L[v]) != 0
    if mode == "round":
        big = popcount_array(L) >= 2
        keep &= big[u] & big[v]
    elif mode != "limit":
        raise ValueError(f"unknown mode {mode!r}")
    H = Graph(G.n, G.edges[keep])
    if H.m:
        a = coo_matrix((np.ones(H.m), (H.edges[:, 0], H.edges[:, 1])), shape=(G.n, G.n))
        ncomp, comp = connected_components(a, directed=False)
    else:
        ncomp, comp = G.n, np.arange(G.n)
    return ReducedGraph(H, s, L.astype(np.uint64), k, comp, int(ncomp))


def _component_edges(R):
    ce = R.comp[R.graph.edges[:, 0]] if R.graph.m else np.zeros(0, dtype=np.int64)
    order = np.argsort(ce, kind="stable")
    return ce[order], R.graph.edges[order]


def count_legal_colorings_reduced(R, cap=NONTREE_CAP, as_log=False):
    """Number of legal colorings of R (tau(v) in L(v), proper on R's edges):
    product over components; trees by the tree DP, small cyclic components by
    exact frontier counting."""
    ce, edges = _component_edges(R)
    ecount = np.bincount(ce, minlength=R.ncomp) if len(ce) else np.zeros(R.ncomp, dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(ecount)])
    total = 0.0 if as_log else 1
    for c, verts in enumerate(R.components()):
        nv = len(verts)
        if nv == 1:
            sz = dtree.popcount(R.lists[verts[0]])
            if as_log:
                total += math.log(sz) if sz else -math.inf
            else:
                total *= sz
            continue
        loc = {int(v): i for i, v in enumerate(verts)}
        e = edges[starts[c]:starts[c + 1]]
        le = [(loc[int(a)], loc[int(b)]) for a, b in e]
        lists = [int(R.lists[v]) for v in verts]
        if len(le) == nv - 1:
            if as_log:
                total += dtree.forest_log_count(nv, le, lists, R.k)
            else:
                total *= dtree.forest_count(Graph(nv, le), lists, R.k)
        else:
            if nv > cap:
                raise ValueError(f"component {c} has {nv} vertices and a cycle; cap is {cap}")
            cnt = count_list_colorings(nv, le, [dtree.mask_colors(x) for x in lists])
            if as_log:
                total += math.log(cnt) if cnt else -math.inf
            else:
                total *= cnt
    return total


def log_legal_colorings_reduced(R, cap=NONTREE_CAP):
    return count_legal_colorings_reduced(R, cap, as_log=True)


def distances(G, v):
    adj = G.adjacency()
    dist = np.full(G.n, -1, dtype=np.int64)
    dist[v] = 0
    queue = [v]
    for x in queue:
        for u in adj[x]:
            if dist[u] < 0:
                dist[u] = dist[x] + 1
                queue.append(int(u))
    return dist


def brute_force_lists(G, sigma, k, t):
    """Achievable colors at each v when every vertex farther than t from v
    keeps its sigma color (exact list-coloring count per candidate color)."""
    s = _colors(sigma)
    out = np.zeros(G.n, dtype=np.uint64)
    everything = list(range(k))
    for v in range(G.n):
        dist = distances(G, v)
        allowed = [[int(s[u])] if (dist[u] > t or dist[u] < 0) else everything for u in range(G.n)]
        for c in range(k):
            allowed[v] = [c]
            if count_list_colorings(G.n, G, allowed) > 0:
                out[v] |= np.uint64(1) << np.uint64(c)
    return out
