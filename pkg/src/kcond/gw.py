"""Multi-type Galton-Watson process GW(d, k, q*) over vertex types (i, ell)."""
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dtree
from .rng import stream

HARD_CAP = 10**6


class Supercritical(RuntimeError):
    """Raised when sampling is requested for a non-subcritical process."""


class TreeTooLarge(RuntimeError):
    pass


@dataclass
class GWParams:
    d: float
    k: int
    d_prime: float
    q_star: float
    ell_cap: int
    q_by_size: np.ndarray  # q_{i,ell} for one type of each size b (index b)
    total_mass: float  # sum over all types, before truncation
    tail_mass: float  # mass of types with |ell| > ell_cap
    distinct: bool = True  # children must have i' != i
    _cache: dict = field(default_factory=dict, repr=False)

    def size_mass(self):
        """Total root probability of each list size b = 0..ell_cap (index 0 unused)."""
        b = np.arange(self.ell_cap + 1)
        mult = np.array([self.k * math.comb(self.k - 1, x - 1) if x >= 1 else 0 for x in b], dtype=float)
        return mult * self.q_by_size

    def weight(self, i, ell):
        s = dtree.popcount(ell)
        return float(self.q_by_size[s]) if s <= self.ell_cap else 0.0


def q_table(d, k, q, ell_cap=None, distinct=True):
    """Type weights q_{i,ell} = (1/k) e^{|ell|-1} (1-e)^{k-|ell|}, e = exp(-q d'/k)."""
    if not 0 < q <= 1:
        raise ValueError("q must lie in (0, 1]")
    if ell_cap is None:
        ell_cap = min(k, 12)
    ell_cap = int(min(ell_cap, k))
    dp = d * k / (k - 1)
    x = q * dp / k
    log_e = -x
    log_1me = math.log(-math.expm1(-x))
    full = np.zeros(k + 1)
    for b in range(1, k + 1):
        full[b] = math.exp(-math.log(k) + (b - 1) * log_e + (k - b) * log_1me)
    mult = np.array([k * math.comb(k - 1, b - 1) if b else 0 for b in range(k + 1)], dtype=float)
    mass = mult * full
    qb = full[:ell_cap + 1].copy()
    return GWParams(d=d, k=k, d_prime=dp, q_star=q, ell_cap=ell_cap, q_by_size=qb,
                    total_mass=float(math.fsum(mass)), tail_mass=float(math.fsum(mass[ell_cap + 1:])),
                    distinct=distinct)


def gw_params(d, k, ell_cap=None, distinct=True):
    from .fixpoint import scalar_fixed_point
    return q_table(d, k, scalar_fixed_point(d, k), ell_cap, distinct)


# ---------------------------------------------------------------- child types

def admissible_count(k, s, b, distinct=True):
    """Number of child types (i', ell') with |ell'| = b for a parent with
    |ell| = s: ell' meets ell, and i' != i unless distinct is False."""
    n = b * math.comb(k, b) - b * math.comb(k - s, b)
    if distinct:
        n -= math.comb(k - 1, b - 1)
    return n


def _categories(params, s, b):
    """Child categories for parent size s and child size b: list of
    (j, contains_i, weight) with j = |ell ∩ ell'|."""
    key = ("cat", s, b)
    if key not in params._cache:
        k = params.k
        out = []
        for j in range(1, min(s, b) + 1):
            rest = math.comb(k - s, b - j)
            w_in = math.comb(s - 1, j - 1) * rest * (b - 1 if params.distinct else b)
            w_out = math.comb(s - 1, j) * rest * b
            if w_in:
                out.append((j, True, w_in))
            if w_out:
                out.append((j, False, w_out))
        w = np.array([c[2] for c in out], dtype=float)
        params._cache[key] = (out, np.cumsum(w) / w.sum())
    return params._cache[key]


def child_rates(params, s):
    """Poisson rates of children of each size b = 2..ell_cap for parent size s."""
    key = ("rate", s)
    if key not in params._cache:
        r = np.zeros(params.ell_cap + 1)
        for b in range(2, params.ell_cap + 1):
            r[b] = params.d_prime * params.q_by_size[b] * admissible_count(params.k, s, b, params.distinct)
        params._cache[key] = r
    return params._cache[key]


def mean_matrix(params, tol=1e-10, max_iter=100000):
    """Mean offspring matrix lumped by list size (rows: parent size 2..cap,
    columns: child size 2..cap) and its spectral radius by power iteration."""
    cap = params.ell_cap
    if cap < 2:
        return np.zeros((0, 0)), 0.0
    M = np.array([child_rates(params, s)[2:] for s in range(2, cap + 1)])
    x = np.ones(len(M)) / len(M)
    rho = 0.0
    for _ in range(max_iter):
        y = M @ x
        nrm = np.abs(y).sum()
        if nrm == 0:
            return M, 0.0
        y = y / nrm
        if abs(nrm - rho) <= tol * max(1.0, nrm) and np.abs(y - x).max() <= tol:
            rho = nrm
            break
        x, rho = y, nrm
    return M, float(rho)


def is_subcritical(params):
    return mean_matrix(params)[1] < 1.0


def mean_tree_size(params):
    """Expected progeny: e = (I - M)^{-1} 1 per root size, averaged over roots."""
    M, rho = mean_matrix(params)
    if rho >= 1:
        return math.inf
    e = np.linalg.solve(np.eye(len(M)) - M, np.ones(len(M)))
    mass = params.size_mass()
    return float((mass[1] + mass[2:] @ e) / mass[1:].sum())


# ---------------------------------------------------------------- sampling

def _poisson_inv(u, lam):
    p = math.exp(-lam)
    c = p
    x = 0
    while u > c and p > 0:
        x += 1
        p *= lam / x
        c += p
    return x


def _subset(pool, r, rng):
    if r == 0:
        return []
    idx = rng.permutation(len(pool))[:r]
    return [pool[t] for t in idx]


def root_size_cdf(params):
    mass = params.size_mass()[1:]
    return np.cumsum(mass) / mass.sum()


def sample_root_type(params, rng, u=None):
    if u is None:
        u = rng.random()
    cdf = root_size_cdf(params)
    b = int(min(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)) + 1
    i = int(rng.integers(params.k))
    others = [c for c in range(params.k) if c != i]
    return i, dtree.colors_mask([i] + _subset(others, b - 1, rng))


def sample_children(params, i, ell, rng):
    """Offspring types of one individual of type (i, ell)."""
    s = dtree.popcount(ell)
    if s <= 1:
        return []
    k = params.k
    rates = child_rates(params, s)
    inside = dtree.mask_colors(ell)
    inside_wo_i = [c for c in inside if c != i]
    outside = [c for c in range(k) if not (ell >> c) & 1]
    u = rng.random(params.ell_cap - 1)
    out = []
    for b in range(2, params.ell_cap + 1):
        cnt = _poisson_inv(u[b - 2], rates[b])
        if not cnt:
            continue
        cats, cdf = _categories(params, s, b)
        for _ in range(cnt):
            j, has_i, _w = cats[int(np.searchsorted(cdf, rng.random(), side="right"))]
            if has_i:
                core = [i] + _subset(inside_wo_i, j - 1, rng)
            else:
                core = _subset(inside_wo_i, j, rng)
            members = core + _subset(outside, b - j, rng)
            if has_i and params.distinct:
                pick = [c for c in members if c != i]
            else:
                pick = members
            ip = pick[int(rng.integers(len(pick)))]
            out.append((ip, dtree.colors_mask(members)))
    return out


def grow_tree(params, root, rng, max_vertices=HARD_CAP):
    parent, ii, ell = [-1], [root[0]], [root[1]]
    head = 0
    while head < len(parent):
        for ci, cl in sample_children(params, ii[head], ell[head], rng):
            parent.append(head)
            ii.append(ci)
            ell.append(cl)
        if len(parent) > max_vertices:
            raise TreeTooLarge(f"tree exceeded {max_vertices} vertices; the process is probably supercritical")
        head += 1
    return dtree.DecoratedTree(parent, ii, ell, params.k, check=False)


def _require_subcritical(params):
    _, rho = mean_matrix(params)
    if rho >= 1:
        raise Supercritical(
            f"GW(d={params.d:.6g}, k={params.k}) has lumped spectral radius {rho:.6g} >= 1; "
            "trees are infinite with positive probability")
    return rho


def sample_tree(params, seed, index=0, max_vertices=HARD_CAP, check=True):
    """One GW tree from the stream (seed, index)."""
    if check:
        _require_subcritical(params)
    rng = stream(seed, "gw-tree", index)
    return grow_tree(params, sample_root_type(params, rng), rng, max_vertices)


def _tree_value(T, method):
    if T.n == 1:
        return math.log(dtree.popcount(T.ell[0]))
    if method == "bethe":
        return dtree.bethe_free_entropy(T) / T.n
    return dtree.dp_count(T)[0] / T.n


def _values_for(params, seed, idx, u, method, max_vertices):
    out = np.empty(len(idx))
    for t, j in enumerate(idx):
        rng = stream(seed, "gw-tree", int(j))
        T = grow_tree(params, sample_root_type(params, rng, u[t]), rng, max_vertices)
        out[t] = _tree_value(T, method)
    return out


def free_entropy_samples(params, n_samples, seed, method="dp", max_vertices=HARD_CAP, workers=1):
    """Per-tree values ln Z(T)/|T| under common random numbers: the root
    size comes from a shared uniform per sample index, the rest of tree
    `idx` from its own stream, so the same seed couples different d.
    The result does not depend on `workers`."""
    _require_subcritical(params)
    u = stream(seed, "gw-root", 0).random(n_samples)
    vals = np.zeros(n_samples)
    cdf = root_size_cdf(params)
    idx = np.flatnonzero(u >= cdf[0])
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(idx) < 2000:
        vals[idx] = _values_for(params, seed, idx, u[idx], method, max_vertices)
        return vals
    parts = np.array_split(idx, 4 * workers)
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(_values_for, params, seed, p, u[p], method, max_vertices) for p in parts]
        for p, f in zip(parts, futs):
            vals[p] = f.result()
    return vals


def estimate_free_entropy(params, n_samples, seed, method="dp", workers=1):
    """Monte-Carlo estimate of E[ln Z(T)/|T|]; returns (mean, stderr)."""
    vals = free_entropy_samples(params, n_samples, seed, method, workers=workers)
    se = vals.std(ddof=1) / math.sqrt(n_samples) if n_samples > 1 else math.inf
    return float(vals.mean()), float(se)
