import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from kcond import fixpoint, gw
from kcond.fixpoint import interval


# ---------------------------------------------------------------- scalar

def test_scalar_k3_d10():
    q = fixpoint.scalar_fixed_point(10.0, 3)
    oracle = brentq(lambda x: fixpoint.scalar_map(x, 10.0, 3) - x, 2 / 3, 1, xtol=1e-16)
    assert abs(q - oracle) < 1e-12
    assert abs(q - 0.98556) < 1e-5
    assert abs(fixpoint.scalar_map(q, 10.0, 3) - q) < 1e-14


@given(st.integers(10, 2000), st.floats(0, 1))
def test_scalar_in_range_on_window(k, frac):
    a, b = interval(k)
    d = a + frac * (b - a)
    q = fixpoint.scalar_fixed_point(d, k)
    assert 2 / 3 <= q <= 1
    assert abs(fixpoint.scalar_map(q, d, k) - q) < 1e-14


def test_gap_to_one_over_k_shrinks():
    gaps = [abs(k * (1 - fixpoint.scalar_fixed_point(interval(k)[0], k)) - 1) for k in (10, 100, 1000, 10000)]
    assert all(x > y for x, y in zip(gaps, gaps[1:]))


def test_no_fixed_point_small_k():
    # for k <= 9 the iteration from 1 leaves [2/3, 1] at the left end of the window
    for k in (3, 5, 6, 8, 9):
        with pytest.raises(fixpoint.NoFixedPoint):
            fixpoint.scalar_fixed_point(interval(k)[0], k)
    # from k = 10 on it exists everywhere on the window
    assert fixpoint.scalar_fixed_point(interval(10)[0], 10) > 2 / 3


def test_warns_below_window():
    with pytest.warns(UserWarning, match="uniqueness"):
        with pytest.raises(fixpoint.NoFixedPoint):
            fixpoint.scalar_fixed_point(3.0, 3)


# ---------------------------------------------------------------- vector

def test_vector_start_and_symmetry():
    assert np.array_equal(fixpoint.iterate_vector_F(50.0, 7, 0), np.full(7, 1 / 7))
    for t in (1, 3, 10):
        q = fixpoint.iterate_vector_F(interval(12)[0], 12, t)
        assert np.ptp(q) < 1e-16


def test_vector_converges_k20():
    k = 20
    d = interval(k)[0]
    q = fixpoint.iterate_vector_F(d, k, 50)
    assert np.max(np.abs(q - fixpoint.scalar_fixed_point(d, k) / k)) < 1e-8


def test_vector_contracts_off_symmetry():
    k = 20
    d = interval(k)[0]
    target = fixpoint.scalar_fixed_point(d, k) / k
    q0 = np.random.default_rng(0).uniform(0.5, 1.5, k) / k
    devs = [np.max(np.abs(fixpoint.iterate_vector_F(d, k, t, q0) - target)) for t in range(0, 30, 5)]
    assert all(x > y for x, y in zip(devs, devs[1:]))
    assert devs[-1] < 1e-8


# ---------------------------------------------------------------- Sigma

def test_first_terms_window_k50():
    k = 50
    v = fixpoint.sigma_first_terms(fixpoint.asymptotic_dcond(k), k)
    assert 0.5 * math.log(2) / k <= v <= 1.5 * math.log(2) / k


def test_sigma_is_first_terms_minus_free_entropy():
    k = 30
    d = interval(k)[0]
    s, se = fixpoint.sigma(d, k, 4000, 7)
    fe, se2 = gw.estimate_free_entropy(gw.gw_params(d, k), 4000, 7)
    assert s == fixpoint.sigma_first_terms(d, k) - fe and se == se2


def test_sigma_deterministic():
    d = interval(30)[0] + 0.3
    assert fixpoint.sigma(d, 30, 3000, 4) == fixpoint.sigma(d, 30, 3000, 4)


def test_sigma_decreasing_k30():
    rows = fixpoint.sigma_curve(30, *interval(30), 5, 40000, 2)
    vals = [r[1] for r in rows]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert [r[0] for r in rows] == sorted(r[0] for r in rows)


def test_sign_condition_refusal():
    with pytest.raises(fixpoint.SignConditionFailed) as exc:
        fixpoint.find_dcond(30, 20, 0.01, 1)
    assert len(exc.value.values) == 2


def test_dcond_supercritical_refusal():
    with pytest.raises(gw.Supercritical):
        fixpoint.find_dcond(20, 100, 0.01, 1)


@pytest.mark.slow
def test_dcond_k30():
    k = 30
    a = fixpoint.find_dcond(k, 100000, 0.1, 5)
    b = fixpoint.find_dcond(k, 100000, 0.05, 5)
    lo, hi = interval(k)
    assert lo <= a["d_cond"] <= hi and a["interval_check"]
    assert abs(a["d_cond"] - b["d_cond"]) < 2 * a["half_width"]
    assert abs(a["d_cond"] - fixpoint.asymptotic_dcond(k)) < 1.0


# ---------------------------------------------------------------- popdyn

def test_hard_field_examples():
    P = np.zeros((50, 4))
    P[:, 0] = 1
    rho, _ = fixpoint.hard_fields(P)
    assert rho.tolist() == [1, 0, 0, 0]
    rho, by_size = fixpoint.hard_fields(np.full((50, 4), 0.25))
    assert not rho.any()
    assert np.allclose(by_size[:, 4], 1.0)


def test_z_gamma_uniform():
    k = 6
    P = np.full((100, k), 1 / k)
    for g in range(1, 11):
        val, se = fixpoint.z_gamma(P, g)
        assert abs(val - (k - 1) ** g / k ** (g - 1)) < 1e-12 and se < 1e-12


def test_frozen_init_masses():
    k, q = 10, 0.9
    P = fixpoint.frozen_init(10000, k, q)
    rho, _ = fixpoint.hard_fields(P)
    assert np.allclose(rho, q / k)
    assert np.allclose(P.sum(axis=1), 1)


def test_population_size_checked():
    with pytest.raises(ValueError):
        fixpoint.popdyn_run(50.0, 10, 500, 1, 1)


def test_popdyn_stays_frozen():
    k = 30
    d = interval(k)[0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pop = fixpoint.popdyn_run(d, k, 5000, 6, 3)
    P = pop.points
    assert np.allclose(P.sum(axis=1), 1) and (P >= 0).all()
    rho, _ = fixpoint.hard_fields(pop)
    assert rho.sum() >= 2 / 3
    assert pop.N == 5000 and len(pop.ess) == 6


def test_popdyn_deterministic():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = fixpoint.popdyn_run(interval(15)[0], 15, 2000, 3, 8).points
        b = fixpoint.popdyn_run(interval(15)[0], 15, 2000, 3, 8).points
    assert np.array_equal(a, b)


def test_low_ess_warns():
    with pytest.warns(UserWarning, match="effective sample size"):
        fixpoint.popdyn_run(interval(15)[0], 15, 2000, 2, 1)


def test_systematic_resample_counts():
    w = np.array([0.5, 0.25, 0.25, 0.0])
    idx = fixpoint.systematic_resample(w, np.random.default_rng(0))
    counts = np.bincount(idx, minlength=4)
    assert counts.tolist() == [2, 1, 1, 0]


def test_batch_stderr_iid():
    x = np.random.default_rng(1).normal(size=10000)
    assert abs(fixpoint.batch_stderr(x) - 0.01) < 0.005


@pytest.mark.slow
def test_bethe_popdyn_matches_gw_k30():
    k = 30
    d = interval(k)[0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pop = fixpoint.popdyn_run(d, k, 20000, 8, 4)
    bv, bse = fixpoint.bethe_popdyn(pop, d, 200000, 4)
    gv, gse = gw.estimate_free_entropy(gw.gw_params(d, k), 40000, 4)
    assert abs(bv - gv) <= 3 * math.hypot(bse, gse)
