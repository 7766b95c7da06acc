"""Brute-force clusters on small instances and tree statistics of planted graphs."""
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import norm

from . import dtree, gw, wp
from .fixpoint import iterate_vector_F
from .graphs import _colors, class_sizes, gen_planted_p, is_proper

ENUM_CAP = 16
OVERLAP = 0.51


# ---------------------------------------------------------------- enumeration

def enumerate_proper(G, k, cap=ENUM_CAP):
    """All proper k-colorings of G as an (count, n) int8 array."""
    if G.n > cap:
        raise ValueError(f"refusing enumeration: n={G.n} exceeds cap {cap}")
    adj = G.adjacency()
    # BFS-like order keeps the partial colorings constrained early
    order, seen = [], np.zeros(G.n, dtype=bool)
    for r in np.argsort(-G.degrees(), kind="stable"):
        if seen[r]:
            continue
        seen[r] = True
        queue = [int(r)]
        for v in queue:
            order.append(v)
            for u in adj[v]:
                if not seen[u]:
                    seen[u] = True
                    queue.append(int(u))
    pos = {v: t for t, v in enumerate(order)}
    part = np.zeros((1, 0), dtype=np.int8)
    for t, v in enumerate(order):
        back = [pos[int(u)] for u in adj[v] if pos[int(u)] < t]
        rep = np.repeat(part, k, axis=0)
        col = np.tile(np.arange(k, dtype=np.int8), len(part))
        ok = np.ones(len(rep), dtype=bool)
        for b in back:
            ok &= rep[:, b] != col
        part = np.concatenate([rep[ok], col[ok, None]], axis=1)
    return np.ascontiguousarray(part[:, [pos[v] for v in range(G.n)]])


def diag_overlaps(sigma, taus, k):
    """rho_ii(sigma, tau) for each row tau, shape (count, k)."""
    s = _colors(sigma)
    n = len(s)
    same = taus == s[None, :]
    out = np.zeros((len(taus), k))
    for i in range(k):
        out[:, i] = same[:, s == i].sum(axis=1) / n
    return out


@dataclass
class ClusterResult:
    size: int
    members_sample: np.ndarray
    lists: np.ndarray  # per-vertex mask of colors taken inside the cluster
    members: np.ndarray


def cluster_brute(G, sigma, k, cap=ENUM_CAP, proper=None):
    """C(G, sigma): proper colorings tau with rho_ii(sigma, tau) >= 0.51/k for all i."""
    s = _colors(sigma)
    if not is_proper(G, s):
        raise ValueError("sigma is not a proper coloring of G")
    if proper is None:
        proper = enumerate_proper(G, k, cap)
    ok = np.all(diag_overlaps(s, proper, k) >= OVERLAP / k, axis=1)
    members = proper[ok]
    lists = np.zeros(G.n, dtype=np.uint64)
    for c in range(k):
        has = np.any(members == c, axis=0)
        lists |= has.astype(np.uint64) << np.uint64(c)
    return ClusterResult(int(ok.sum()), members[:100], lists, members)


def is_balanced(sigma, k, n=None):
    c = class_sizes(sigma, k)
    n = len(_colors(sigma)) if n is None else n
    return bool(np.all(np.abs(c - n / k) <= math.sqrt(n)))


def kappa_default(k):
    return math.log(k) ** 20 / k


def predicates(G, sigma, k, kappa=None, cap=ENUM_CAP):
    """Balanced, separable(kappa) and tame (T1 and T2 and T3), evaluated literally."""
    s = _colors(sigma)
    if kappa is None:
        kappa = kappa_default(k)
    proper = enumerate_proper(G, k, cap)
    cl = cluster_brute(G, s, k, cap, proper=proper)
    bal = np.array([is_balanced(t, k, G.n) for t in cl.members], dtype=bool)
    rho = diag_overlaps(s, cl.members[bal], k)
    separable = bool(np.all(rho >= (1 - kappa) / k))
    n, m = G.n, G.m
    t3 = int(bal.sum()) * k ** m <= k ** n * (k - 1) ** m
    balanced = is_balanced(s, k)
    return {"balanced": balanced, "separable": separable, "kappa": kappa,
            "separable_vacuous": kappa >= 1, "T3": bool(t3),
            "tame": bool(balanced and separable and t3),
            "cluster_balanced_size": int(bal.sum())}


def sandwich(G, sigma, k, threshold=1, cap=ENUM_CAP):
    """Quantities of the cluster-size sandwich on one small instance.

    The premise checked here: every cluster member agrees with sigma on the
    core, every class of sigma restricted to the core holds at least 0.51 n/k
    vertices, and planted WP freezes every core vertex. Under it, legal
    colorings of the planted reduced graph are cluster members, and cluster
    members are legal for the core-variant lists."""
    s = _colors(sigma)
    cl = cluster_brute(G, s, k, cap)
    res_p = wp.wp_run(G, s, k, "planted")
    res_c = wp.wp_run(G, s, k, "core", threshold)
    members = res_c.core_members
    own = np.uint64(1) << s.astype(np.uint64)
    frozen = bool(np.all(cl.members[:, members] == s[members][None, :])) if cl.size else False
    core_classes = np.bincount(s[members], minlength=k)
    heavy = bool(np.all(core_classes >= OVERLAP * G.n / k))
    wp_frozen = bool(np.all(res_p.lists[members] == own[members]))
    R_p = wp.reduced_graph(G, s, res_p, k, "limit")
    R_c = wp.reduced_graph(G, s, res_c, k, "limit")
    z_p = wp.count_legal_colorings_reduced(R_p)
    z_c = wp.count_legal_colorings_reduced(R_c)
    sub = bool(np.all((cl.lists & ~res_c.lists) == 0))
    return {"cluster_size": cl.size, "z_planted": int(z_p), "z_core": int(z_c),
            "core_size": int(members.sum()), "core_frozen_in_cluster": frozen,
            "core_classes_heavy": heavy, "core_frozen_by_wp": wp_frozen,
            "premise": frozen and heavy and wp_frozen,
            "cluster_lists_within_core_lists": sub,
            "lower_ok": z_p <= cl.size, "upper_ok": cl.size <= z_c}


# ---------------------------------------------------------------- tree classes

def _code(children, label, v):
    return "(" + label[v] + "".join(sorted(_code(children, label, u) for u in children[v])) + ")"


def rooted_code(adj, label, root):
    """AHU canonical string of the tree adj rooted at root, with vertex labels."""
    children = {root: []}
    stack = [(root, -1)]
    while stack:
        v, p = stack.pop()
        children.setdefault(v, [])
        for u in adj[v]:
            if u != p:
                children[v].append(u)
                children.setdefault(u, [])
                stack.append((u, v))
    return _code(children, label, root)


def type_label(i, ell):
    return f"{int(i)}:{int(ell)}"


def parse_code(code):
    """Inverse of the AHU encoding: returns ((i, ell), [children...])."""
    pos = 0

    def rec():
        nonlocal pos
        assert code[pos] == "("
        pos += 1
        end = pos
        while code[end] not in "()":
            end += 1
        i, ell = code[pos:end].split(":")
        pos = end
        kids = []
        while code[pos] == "(":
            kids.append(rec())
        pos += 1
        return (int(i), int(ell)), kids

    return rec()


def tree_code(T):
    """Canonical code of a DecoratedTree rooted at its root."""
    adj = [[] for _ in range(T.n)]
    for p, v in T.edges():
        adj[p].append(v)
        adj[v].append(p)
    label = [type_label(T.i[v], T.ell[v]) for v in range(T.n)]
    return rooted_code(adj, label, T.root)


def relabel_code(code, perm):
    """Apply a color map perm (dict) to every type in a code."""
    def rec(node):
        (i, ell), kids = node
        new_ell = dtree.colors_mask(perm[c] for c in dtree.mask_colors(ell))
        return "(" + type_label(perm[i], new_ell) + "".join(sorted(rec(x) for x in kids)) + ")"
    return rec(parse_code(code))


def used_colors(code):
    out = set()

    def rec(node):
        (i, ell), kids = node
        out.add(i)
        out.update(dtree.mask_colors(ell))
        for x in kids:
            rec(x)
    rec(parse_code(code))
    return sorted(out)


def _color_groups(code):
    """Colors of a code grouped by their role pattern across vertices;
    colors in one group are interchangeable."""
    pattern = {c: [] for c in used_colors(code)}

    def rec(node):
        (i, ell), kids = node
        for c in pattern:
            pattern[c].append((c == i, bool((ell >> c) & 1)))
        for x in kids:
            rec(x)
    rec(parse_code(code))
    groups = {}
    for c, pat in pattern.items():
        groups.setdefault(tuple(pat), []).append(c)
    return list(groups.values())


def _multiset_orders(counts):
    """Distinct sequences using symbol g exactly counts[g] times."""
    total = sum(counts)
    if total == 0:
        yield []
        return
    for g, c in enumerate(counts):
        if c:
            counts[g] -= 1
            for rest in _multiset_orders(counts):
                yield [g] + rest
            counts[g] += 1


def _relabelings(code):
    """One representative color map per coset of the interchangeable-color
    permutations, with the size of that coset."""
    groups = _color_groups(code)
    weight = math.prod(math.factorial(len(g)) for g in groups)
    for seq in _multiset_orders([len(g) for g in groups]):
        nxt = [0] * len(groups)
        perm = {}
        for target, g in enumerate(seq):
            perm[groups[g][nxt[g]]] = target
            nxt[g] += 1
        yield perm, weight


@lru_cache(maxsize=None)
def orbit_key(code):
    """Canonical representative of the class up to color permutations."""
    return min(relabel_code(code, perm) for perm, _ in _relabelings(code))


@lru_cache(maxsize=None)
def orbit_size(code, k):
    cols = used_colors(code)
    inv = {t: c for t, c in enumerate(cols)}
    fix = 0
    for perm, w in _relabelings(code):
        # perm sends colors to 0..u-1; compose with the inverse of the sorted
        # labeling so the comparison is against the original colors
        if relabel_code(code, {c: inv[t] for c, t in perm.items()}) == code:
            fix += w
    return math.perm(k, len(cols)) // fix


def shape_key(code):
    """Color-blind shape: list sizes and distinguished-color membership of
    the parent list, canonical under color permutations."""
    def rec(node, parent_ell):
        (i, ell), kids = node
        tag = f"{dtree.popcount(ell)}{'+' if (parent_ell >> i) & 1 else '-'}"
        return "(" + tag + "".join(sorted(rec(x, ell) for x in kids)) + ")"
    return rec(parse_code(code), 0)


def _child_factor(params, node):
    """Probability that an individual of the given type has exactly the
    given offspring classes."""
    (i, ell), kids = node
    s = dtree.popcount(ell)
    if s == 1:
        return 1.0 if not kids else 0.0
    lam = float(gw.child_rates(params, s).sum())
    p = math.exp(-lam)
    groups = Counter(_node_code(x) for x in kids)
    for code, c in groups.items():
        (ci, cl), _ = parse_code(code)
        cs = dtree.popcount(cl)
        admissible = cs > 1 and (cl & ell) and (ci != i or not params.distinct) and cs <= params.ell_cap
        if not admissible:
            return 0.0
        rate = params.d_prime * params.q_by_size[cs] * _child_factor(params, parse_code(code))
        p *= rate ** c / math.factorial(c)
    return p


def _node_code(node):
    (i, ell), kids = node
    return "(" + type_label(i, ell) + "".join(sorted(_node_code(x) for x in kids)) + ")"


def class_probability(params, code):
    """Pr[GW tree is isomorphic to the rooted decorated class `code`]."""
    node = parse_code(code)
    (i, ell), _ = node
    return params.weight(i, ell) * _child_factor(params, node)


def orbit_probability(params, code):
    return orbit_size(code, params.k) * class_probability(params, code)


def vertex_classes(R, max_size=8):
    """Canonical class of T(v) for every vertex (component of the reduced
    graph rooted at v), or None for components larger than max_size or with
    a cycle."""
    out = [None] * R.graph.n
    adj = R.graph.adjacency()
    label = [type_label(R.sigma[v], R.lists[v]) for v in range(R.graph.n)]
    for verts in R.components():
        if len(verts) > max_size:
            continue
        ne = sum(len(adj[v]) for v in verts) // 2
        if ne != len(verts) - 1:
            continue
        for v in verts:
            out[v] = rooted_code(adj, label, int(v))
    return out


def smallest_orbits(params, count=3, max_vertices=2):
    """Color-permutation orbits of GW classes with at most max_vertices
    vertices, ordered by vertex count and then by decreasing probability."""
    k = params.k
    cands = []
    for b in range(1, min(params.ell_cap, 4) + 1):
        ell = (1 << b) - 1
        cands.append("(" + type_label(0, ell) + ")")
    if max_vertices >= 2:
        for s in range(2, min(params.ell_cap, 4) + 1):
            for b in range(2, min(params.ell_cap, 4) + 1):
                seen = set()
                root_ell = (1 << s) - 1
                for members in itertools.combinations(range(min(k, s + b)), b):
                    cl = dtree.colors_mask(members)
                    if not cl & root_ell:
                        continue
                    for ci in members:
                        if ci == 0 and params.distinct:
                            continue
                        code = "(" + type_label(0, root_ell) + "(" + type_label(ci, cl) + "))"
                        key = orbit_key(code)
                        if key not in seen:
                            seen.add(key)
                            cands.append(key)
    keys = {}
    for c in cands:
        keys.setdefault(orbit_key(c), c)
    scored = []
    for key in keys:
        nv = key.count("(")
        p = orbit_probability(params, key)
        if p > 0:
            scored.append((nv, -p, key))
    scored.sort()
    return [key for _, _, key in scored[:count]]


def compare_tree_stats(n, k, d, classes=None, seed=0, mode="round", max_class_size=8, ell_cap=None,
                       distinct=True, min_expected=100.0, z=5.0):
    """Planted graph vs GW statistics: frozen fractions per WP round and the
    frequencies of decorated-tree classes (up to color permutation)."""
    params = gw.gw_params(d, k, ell_cap if ell_cap is not None else k, distinct)
    gw._require_subcritical(params)
    sigma, G = gen_planted_p(n, k, d, seed)
    res = wp.wp_run(G, sigma, k, "planted")
    s = sigma.colors
    own = np.uint64(1) << s.astype(np.uint64)

    frozen = []
    for t, L in enumerate(res.history):
        emp = np.array([np.sum((L == own) & (s == i)) for i in range(k)]) / n
        pred = iterate_vector_F(d, k, t + 1)
        se = np.sqrt(pred * (1 - pred) / n)
        frozen.append({"t": t, "empirical": emp.tolist(), "predicted": pred.tolist(),
                       "z": ((emp - pred) / se).tolist()})
    final_frozen = float(np.mean(res.lists == own))
    fz_se = math.sqrt(params.q_star * (1 - params.q_star) / n)

    R = wp.reduced_graph(G, s, res, k, mode=mode, t=res.rounds - 1)
    vc = vertex_classes(R, max_class_size)
    if classes is None:
        classes = smallest_orbits(params)
    # only classes with a queried color-blind shape can match
    shapes = {shape_key(c) for c in classes}
    counts = Counter(orbit_key(c) for c in vc if c is not None and shape_key(c) in shapes)
    report = []
    alpha_z = z
    if len(classes) > 1:
        # Bonferroni: keep the family-wise level of a single z-sigma test
        alpha_z = float(norm.isf(norm.sf(z) / len(classes)))
    for code in classes:
        key = orbit_key(code)
        p = orbit_probability(params, key)
        if n * p < min_expected:
            raise ValueError(f"class {key} has GW probability {p:.3g}; n*p below {min_expected}")
        size = key.count("(")
        emp = counts.get(key, 0) / n
        se = math.sqrt(size * p * (1 - p) / n)
        report.append({"class": key, "vertices": size, "gw_probability": p, "empirical": emp,
                       "stderr": se, "z": (emp - p) / se, "pass": abs(emp - p) <= alpha_z * se})
    return {"n": n, "k": k, "d": d, "q_star": params.q_star, "wp_rounds": res.rounds,
            "frozen_fraction": final_frozen, "frozen_stderr": fz_se,
            "frozen_z": (final_frozen - params.q_star) / fz_se,
            "frozen_by_round": frozen, "classes": report, "z_threshold": alpha_z,
            "reduced_mode": mode, "edges": G.m}
