import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kcond import graphs, wp
from kcond.dtree import mask_colors
from kcond.graphs import Graph

FULL3 = 7


def planted(seed, n_lo=6, n_hi=40, k=3, lo=1.0, hi=4.0):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_lo, n_hi + 1))
    sig = graphs.balanced_coloring(n, k, rng)
    m = min(graphs.bichromatic_count(sig.colors, k), int(rng.uniform(lo, hi) * n))
    return graphs.gen_planted_m(n, m, sig, rng, k), sig


seeds = st.integers(0, 10**6)


# ---------------------------------------------------------------- examples

def test_path_planted():
    res = wp.wp_run(Graph(3, [(0, 1), (1, 2)]), [0, 1, 0], 3, keep_messages=True)
    assert res.lists.tolist() == [FULL3] * 3
    assert not res.messages_history[1].any()


def test_triangle_planted():
    tri = Graph(3, [(0, 1), (1, 2), (0, 2)])
    res = wp.wp_run(tri, [0, 1, 2], 3, keep_messages=True)
    assert not res.messages_history[1].any()
    assert res.lists.tolist() == [FULL3] * 3
    R = wp.reduced_graph(tri, [0, 1, 2], res, 3)
    assert R.graph.m == 3
    assert abs(wp.log_legal_colorings_reduced(R) - math.log(6)) < 1e-12


def test_triangle_core():
    tri = Graph(3, [(0, 1), (1, 2), (0, 2)])
    res = wp.wp_run(tri, [0, 1, 2], 3, "core", 1)
    assert res.core_members.all()
    assert res.lists.tolist() == [1, 2, 4]


def test_improper_rejected():
    with pytest.raises(ValueError):
        wp.wp_run(Graph(2, [(0, 1)]), [0, 0], 2)


# ---------------------------------------------------------------- reduced graphs

def test_reduced_full_lists_is_identity():
    G, sig = planted(3)
    R = wp.reduced_graph(G, sig, np.full(G.n, FULL3, dtype=np.uint64), 3)
    assert np.array_equal(R.graph.edges, G.edges)


def test_reduced_singletons_drop_everything():
    G, sig = planted(5)
    L = np.uint64(1) << sig.colors.astype(np.uint64)
    for mode in ("limit", "round"):
        R = wp.reduced_graph(G, sig, L, 3, mode=mode, t=0)
        assert R.graph.m == 0
        assert wp.log_legal_colorings_reduced(R) == 0.0


def test_round_mode_drops_small_lists():
    P3 = Graph(3, [(0, 1), (1, 2)])
    L = np.array([3, 3, 2], dtype=np.uint64)
    assert wp.reduced_graph(P3, [0, 1, 0], L, 3).graph.m == 2
    R = wp.reduced_graph(P3, [0, 1, 0], L, 3, mode="round", t=0)
    assert R.graph.edges.tolist() == [[0, 1]]


def test_logz_refuses_large_cyclic_component():
    n = 40
    G = Graph(n, [(i, (i + 1) % n) for i in range(n)])
    sig = np.arange(n) % 2
    R = wp.reduced_graph(G, sig, np.full(n, FULL3, dtype=np.uint64), 3)
    with pytest.raises(ValueError, match="component 0"):
        wp.log_legal_colorings_reduced(R, cap=30)


# ---------------------------------------------------------------- properties

@settings(max_examples=30)
@given(seeds)
def test_legal_colorings_are_proper(seed):
    G, sig = planted(seed, 4, 10, lo=1.5, hi=3.5)
    res = wp.wp_run(G, sig, 3)
    R = wp.reduced_graph(G, sig, res, 3)
    count = 0
    for tau in itertools.product(*[mask_colors(int(x)) for x in res.lists]):
        if graphs.is_proper(R.graph, tau):
            count += 1
            assert graphs.is_proper(G, tau)
    assert count == wp.count_legal_colorings_reduced(R)


@given(seeds)
def test_sigma_in_every_list(seed):
    G, sig = planted(seed)
    own = np.uint64(1) << sig.colors.astype(np.uint64)
    res = wp.wp_run(G, sig, 3)
    assert all(np.all(h & own) for h in res.history)
    for th in (1, 2):
        c = wp.wp_run(G, sig, 3, "core", th)
        assert all(np.all(h & own) for h in c.history)


@given(seeds)
def test_planted_messages_non_increasing(seed):
    G, sig = planted(seed)
    res = wp.wp_run(G, sig, 3, keep_messages=True)
    mh = res.messages_history
    assert all(not np.any(b & ~a) for a, b in zip(mh, mh[1:]))
    assert not res.cycle


@given(seeds, st.integers(2, 4))
def test_core_messages_non_decreasing(seed, threshold):
    # at threshold 1 a core vertex may lose its own warning after round 0,
    # so monotonicity is asserted from threshold 2 on
    G, sig = planted(seed)
    res = wp.wp_run(G, sig, 3, "core", threshold, keep_messages=True)
    mh = res.messages_history
    assert all(not np.any(a & ~b) for a, b in zip(mh, mh[1:]))


@given(seeds, st.sampled_from(["planted", "core"]))
def test_at_most_one_bit_after_round_zero(seed, variant):
    G, sig = planted(seed)
    res = wp.wp_run(G, sig, 3, variant, 2, keep_messages=True)
    for msg in res.messages_history[1:]:
        assert np.all(wp.popcount_array(msg) <= 1)


@given(seeds, st.integers(2, 4))
def test_list_chain(seed, threshold):
    G, sig = planted(seed)
    L = wp.wp_run(G, sig, 3).lists
    C = wp.wp_run(G, sig, 3, "core", threshold)
    assert not np.any(L & ~C.lists)
    assert not np.any(C.lists & ~C.history[0])


@given(seeds)
def test_fixed_point_lists_equal_union(seed):
    G, sig = planted(seed)
    res = wp.wp_run(G, sig, 3)
    assert np.array_equal(res.lists, res.history[-1])


@settings(max_examples=80)
@given(seeds)
def test_exact_on_trees(seed):
    rng = np.random.default_rng(seed)
    n, k = int(rng.integers(2, 13)), int(rng.integers(3, 5))
    G = graphs.gen_random_tree(n, rng)
    sig = graphs.random_proper_coloring(G, k, rng)
    res = wp.wp_run(G, sig, k)
    for t in range(n + 1):
        assert np.array_equal(res.lists_at(t), wp.brute_force_lists(G, sig, k, t))


def test_deterministic():
    G, sig = planted(11, 200, 200)
    a, b = wp.wp_run(G, sig, 3), wp.wp_run(G, sig, 3)
    assert np.array_equal(a.messages, b.messages) and np.array_equal(a.lists, b.lists)
