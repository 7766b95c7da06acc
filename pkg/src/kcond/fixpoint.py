"""Scalar and vector fixed points, the functional Sigma_k(d), its zero, and
population dynamics for the distributional fixed point."""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import gw
from .rng import stream


class NoFixedPoint(RuntimeError):
    pass


class SignConditionFailed(RuntimeError):
    def __init__(self, msg, values):
        super().__init__(msg)
        self.values = values


def interval(k):
    """The candidate window [(2k-1) ln k - 2, (2k-1) ln k - 1]."""
    c = (2 * k - 1) * math.log(k)
    return c - 2.0, c - 1.0


def asymptotic_dcond(k):
    return (2 * k - 1) * math.log(k) - 2 * math.log(2)


def scalar_map(q, d, k):
    return (-math.expm1(-d * q / (k - 1))) ** (k - 1)


def scalar_fixed_point(d, k, max_iter=100000, tol=1e-14):
    """Fixed point of q -> (1 - exp(-dq/(k-1)))^(k-1), iterated from q = 1."""
    lo = interval(k)[0]
    q = 1.0
    for _ in range(max_iter):
        fq = scalar_map(q, d, k)
        if abs(fq - q) < tol:
            q = fq
            break
        q = fq
    res = abs(scalar_map(q, d, k) - q)
    if d < lo:
        warnings.warn(f"d={d} is below {lo:.6g}; uniqueness in [2/3,1] is not guaranteed", stacklevel=2)
    if not (2 / 3 <= q <= 1 and res < tol):
        raise NoFixedPoint(f"no fixed point in [2/3,1] for d={d}, k={k}: iteration from 1 reached q={q:.6g}")
    return q


def vector_map(q, d, k):
    dp = d * k / (k - 1)
    a = -np.expm1(-dp * np.asarray(q, dtype=float))
    out = np.empty(k)
    for i in range(k):
        out[i] = np.prod(np.delete(a, i)) / k
    return out


def iterate_vector_F(d, k, t, q0=None):
    """t applications of F(q)_i = (1/k) prod_{j != i} (1 - exp(-d' q_j)) from q0 = 1/k."""
    q = np.full(k, 1.0 / k) if q0 is None else np.asarray(q0, dtype=float)
    for _ in range(t):
        q = vector_map(q, d, k)
    return q


def sigma_first_terms(d, k):
    return math.log(k) + 0.5 * d * math.log1p(-1.0 / k)


def sigma(d, k, n_samples, seed, method="dp", ell_cap=None, workers=1):
    """Sigma_k(d) = ln k + (d/2) ln(1 - 1/k) - E[ln Z(T)/|T|]; (value, stderr)."""
    params = gw.gw_params(d, k, ell_cap)
    fe, se = gw.estimate_free_entropy(params, n_samples, seed, method, workers)
    return sigma_first_terms(d, k) - fe, se


def sigma_curve(k, dmin, dmax, steps, n_samples, seed, workers=1):
    """Rows (d, sigma, stderr, n_samples) on an even grid, same seed at every d."""
    rows = []
    for d in np.linspace(dmin, dmax, steps):
        s, se = sigma(float(d), k, n_samples, seed, workers=workers)
        rows.append((float(d), s, se, n_samples))
    return rows


def find_dcond(k, n_samples, tol, seed, z_sign=3.0, z_ci=1.96, max_steps=60, workers=1):
    """Bisection for the zero of Sigma_k on the candidate window under common
    random numbers. Stops when the bracket is below tol or when the midpoint
    value is within z_sign standard errors of zero."""
    a, b = interval(k)
    evals = []

    def ev(d):
        s, se = sigma(d, k, n_samples, seed, workers=workers)
        evals.append((d, s, se))
        return s, se

    sa, sea = ev(a)
    sb, seb = ev(b)
    if not (sa - z_sign * sea > 0 and sb + z_sign * seb < 0):
        raise SignConditionFailed(
            f"Sigma does not change sign on [{a:.6g}, {b:.6g}]: {sa:.3g}+-{sea:.2g}, {sb:.3g}+-{seb:.2g}",
            evals)
    slope = (sb - sa) / (b - a)
    stop = "tol"
    for _ in range(max_steps):
        if b - a <= tol:
            break
        m = 0.5 * (a + b)
        sm, sem = ev(m)
        if abs(sm) < z_sign * sem:
            a = b = m
            sea = seb = sem
            stop = "noise"
            break
        if sm > 0:
            a, sea = m, sem
        else:
            b, seb = m, sem
    d = 0.5 * (a + b)
    half = 0.5 * (b - a) + z_ci * max(sea, seb) / abs(slope)
    lo, hi = interval(k)
    return {"d_cond": d, "ci_lo": d - half, "ci_hi": d + half, "half_width": half,
            "interval": [lo, hi], "interval_check": bool(lo <= d - half and d + half <= hi),
            "stop": stop, "evaluations": evals}


# ---------------------------------------------------------------- population dynamics

@dataclass
class Population:
    points: np.ndarray
    k: int
    ess: list = field(default_factory=list)

    @property
    def N(self):
        return len(self.points)


def z_gamma(points, gamma):
    """Z_gamma(pi) = sum_h (1 - int mu(h) dpi)^gamma for the empirical measure,
    with a delta-method standard error."""
    P = np.asarray(points)
    nu = P.mean(axis=0)
    val = float(np.sum((1 - nu) ** gamma))
    g = -gamma * (1 - nu) ** (gamma - 1)
    cov = np.cov(P, rowvar=False)
    se = math.sqrt(max(float(g @ cov @ g), 0.0) / len(P))
    return val, se


def frozen_init(N, k, q_star):
    P = np.full((N, k), 1.0 / k)
    per = int(round(q_star * N / k))
    for h in range(k):
        P[h * per:(h + 1) * per] = 0.0
        P[h * per:(h + 1) * per, h] = 1.0
    return P


def popdyn_sweep(P, d, rng, chunk=4000, symmetrize=True):
    """One importance-weighted sweep of the map F_{d,k}; returns new points and ESS."""
    N, k = P.shape
    nu = P.mean(axis=0)
    gam = rng.poisson(d, N)
    newp = np.empty_like(P)
    w = np.empty(N)
    for s in range(0, N, chunk):
        g = gam[s:s + chunk]
        idx = rng.integers(0, N, int(g.sum()))
        one_minus = 1.0 - P[idx]
        prod = np.ones((len(g), k))
        nz = np.flatnonzero(g)
        if len(nz):
            starts = np.concatenate([[0], np.cumsum(g)[:-1]])[nz]
            prod[nz] = np.multiply.reduceat(one_minus, starts, axis=0)
        tot = prod.sum(axis=1)
        zg = np.sum((1.0 - nu)[None, :] ** g[:, None], axis=1)
        ok = tot > 0
        block = np.full((len(g), k), 1.0 / k)
        block[ok] = prod[ok] / tot[ok, None]
        newp[s:s + chunk] = block
        w[s:s + chunk] = tot / zg
    ess = w.sum() ** 2 / np.sum(w * w)
    pick = systematic_resample(w, rng)
    out = newp[pick]
    if symmetrize:
        # the frozen fixed point is invariant under color permutations;
        # relabeling each point at random stops finite-N drift of nu
        perm = np.argsort(rng.random((N, k)), axis=1)
        out = np.take_along_axis(out, perm, axis=1)
    return out, float(ess)


def systematic_resample(w, rng):
    c = np.cumsum(w)
    c /= c[-1]
    u = (rng.random() + np.arange(len(w))) / len(w)
    return np.minimum(np.searchsorted(c, u, side="right"), len(w) - 1)


def popdyn_run(d, k, N, sweeps, seed, q_star=None, symmetrize=True):
    """Population dynamics from the frozen initialization."""
    if N < 1000:
        raise ValueError("population size must be at least 1000")
    if q_star is None:
        q_star = scalar_fixed_point(d, k)
    rng = stream(seed, "popdyn")
    P = frozen_init(N, k, q_star)
    pop = Population(P, k)
    for t in range(sweeps):
        P, ess = popdyn_sweep(P, d, rng, symmetrize=symmetrize)
        pop.ess.append(ess)
    pop.points = P
    _warn_ess(pop)
    return pop


def _warn_ess(pop):
    low = [t for t, e in enumerate(pop.ess) if e < pop.N / 10]
    if low:
        warnings.warn(f"effective sample size below N/10={pop.N / 10:.0f} in {len(low)} of "
                      f"{len(pop.ess)} sweeps (min {min(pop.ess):.0f} at sweep {int(np.argmin(pop.ess))})",
                      stacklevel=3)


def batch_stderr(x, batches=10):
    """Standard error of the mean of a correlated series by batch means."""
    x = np.asarray(x, dtype=float)
    nb = min(batches, len(x))
    if nb < 2:
        return math.inf
    means = np.array([b.mean(axis=0) for b in np.array_split(x, nb)])
    return means.std(axis=0, ddof=1) / math.sqrt(nb)


def popdyn_measure(pop, d, sweeps, seed, gammas=range(1, 11), symmetrize=True):
    """Continue a converged population for `sweeps` sweeps, recording hard
    fields and Z_gamma after each. Returns per-sweep arrays plus sweep means
    and batch-means standard errors."""
    rng = stream(seed, "popdyn-measure")
    P = pop.points
    gammas = list(gammas)
    rho, zg, nu = [], [], []
    for _ in range(sweeps):
        P, ess = popdyn_sweep(P, d, rng, symmetrize=symmetrize)
        pop.ess.append(ess)
        rho.append(hard_fields(P)[0])
        nu.append(P.mean(axis=0))
        zg.append([z_gamma(P, g)[0] for g in gammas])
    pop.points = P
    _warn_ess(pop)
    rho, zg = np.array(rho), np.array(zg)
    return {"rho": rho, "z_gamma": zg, "nu": np.array(nu), "gammas": gammas,
            "rho_mean": rho.mean(axis=0), "rho_se": batch_stderr(rho),
            "z_mean": zg.mean(axis=0), "z_se": batch_stderr(zg)}


def hard_fields(pop, atom_tol=1e-9):
    """rho_i = pi(delta_i); by_size[i, b] = sum over ell containing i with
    |ell| = b of rho_{i,ell} = int k mu(i) 1[supp mu = ell] dpi."""
    P = pop.points if isinstance(pop, Population) else np.asarray(pop)
    N, k = P.shape
    atom = (1.0 - P) <= atom_tol
    rho = atom.sum(axis=0) / N
    size = (P > atom_tol).sum(axis=1)
    by_size = np.zeros((k, k + 1))
    for b in range(1, k + 1):
        sel = size == b
        by_size[:, b] = k * P[sel].sum(axis=0) / N
    return rho, by_size


def _tilted_sampler(P, rng):
    """Draw indices from pi_h (density k mu(h) w.r.t. pi) for given colors h."""
    cdfs = np.cumsum(P, axis=0)
    cdfs /= cdfs[-1]

    def draw(h):
        u = rng.random(len(h))
        out = np.empty(len(h), dtype=np.int64)
        for c in np.unique(h):
            sel = h == c
            out[sel] = np.searchsorted(cdfs[:, c], u[sel], side="right")
        return np.minimum(out, len(P) - 1)

    return draw


def bethe_popdyn(pop, d, n_samples, seed, chunk=20000):
    """Monte-Carlo value of the Bethe functional on a population:
    edge part plus the average vertex part; returns (value, stderr)."""
    P = pop.points if isinstance(pop, Population) else np.asarray(pop)
    N, k = P.shape
    rng = stream(seed, "bethe-popdyn")
    draw = _tilted_sampler(P, rng)
    e_vals = []
    v_vals = []
    for s in range(0, n_samples, chunk):
        m = min(chunk, n_samples - s)
        h1 = rng.integers(0, k, m)
        h2 = (h1 + rng.integers(1, k, m)) % k
        mu1, mu2 = P[draw(h1)], P[draw(h2)]
        e_vals.append(-0.5 * d * np.log1p(-np.sum(mu1 * mu2, axis=1)))
        i = rng.integers(0, k, m)
        gam = rng.poisson(d / (k - 1), (m, k))
        gam[np.arange(m), i] = 0
        tot = gam.sum(axis=1)
        vals = np.full(m, math.log(k))
        color = np.repeat(np.tile(np.arange(k), m), gam.ravel())
        has = tot > 0
        if has.any():
            mus = P[draw(color)]
            with np.errstate(divide="ignore"):
                lg = np.log1p(-mus)
            starts = np.concatenate([[0], np.cumsum(tot)[:-1]])[has]
            logs = np.add.reduceat(lg, starts, axis=0)
            mx = logs.max(axis=1)
            sm = np.exp(logs - mx[:, None]).sum(axis=1)
            vals[has] = mx + np.log(sm)
        v_vals.append(vals)
    e = np.concatenate(e_vals)
    v = np.concatenate(v_vals)
    value = float(e.mean() + v.mean())
    se = math.sqrt(e.var(ddof=1) / len(e) + v.var(ddof=1) / len(v))
    return value, se
