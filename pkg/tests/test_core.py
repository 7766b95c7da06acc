import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kcond import graphs
from kcond.core import core, has_core_property
from kcond.graphs import Graph


@st.composite
def planted_instances(draw, max_n=12):
    n = draw(st.integers(2, max_n))
    k = draw(st.integers(2, 4))
    sigma = np.array(draw(st.lists(st.integers(0, k - 1), min_size=n, max_size=n)))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n) if sigma[u] != sigma[v]]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return Graph(n, edges), sigma, k


def brute_core(G, sigma, k, threshold):
    best = np.zeros(G.n, dtype=bool)
    for r in range(G.n, 0, -1):
        for sub in itertools.combinations(range(G.n), r):
            mask = np.zeros(G.n, dtype=bool)
            mask[list(sub)] = True
            if has_core_property(G, sigma, mask, threshold, k):
                return mask
    return best


def test_examples():
    tri = Graph(3, [(0, 1), (1, 2), (0, 2)])
    assert core(tri, [0, 1, 2], 1, 3).members.all()
    G = graphs.gen_gnm(20, 60, 1)
    sig = graphs.random_proper_coloring(G, 6, 1)
    assert core(G, sig, 101, 6).size == 0
    P3 = Graph(3, [(0, 1), (1, 2)])
    assert core(P3, [0, 1, 0], 1, 3).size == 0


def test_rejects_improper_and_bad_threshold():
    K2 = Graph(2, [(0, 1)])
    with pytest.raises(ValueError):
        core(K2, [1, 1], 1, 2)
    with pytest.raises(ValueError):
        core(K2, [0, 1], 0, 2)


@given(planted_instances(max_n=11), st.integers(1, 3))
def test_matches_brute_force(inst, threshold):
    G, sigma, k = inst
    res = core(G, sigma, threshold, k)
    assert np.array_equal(res.members, brute_core(G, sigma, k, threshold))


@given(planted_instances(max_n=12), st.integers(1, 3), st.data())
def test_contains_every_core_subset(inst, threshold, data):
    G, sigma, k = inst
    res = core(G, sigma, threshold, k)
    mask = np.array(data.draw(st.lists(st.booleans(), min_size=G.n, max_size=G.n)))
    if has_core_property(G, sigma, mask, threshold, k):
        assert not (mask & ~res.members).any()
    assert has_core_property(G, sigma, res.members, threshold, k)


@given(planted_instances(), st.integers(1, 4))
def test_monotone_in_threshold(inst, threshold):
    G, sigma, k = inst
    a = core(G, sigma, threshold, k).members
    b = core(G, sigma, threshold + 1, k).members
    assert not (b & ~a).any()


def test_order_independence():
    # relabel vertices so the FIFO queue sees them in a different order
    for s in range(30):
        sigma, G = graphs.gen_planted_p(60, 3, 5.0, s)
        base = core(G, sigma, 2, 3).members
        perm = np.random.default_rng(s).permutation(G.n)
        H = Graph(G.n, perm[G.edges])
        tau = np.empty(G.n, dtype=np.int64)
        tau[perm] = sigma.colors
        other = core(H, tau, 2, 3).members
        assert np.array_equal(other[perm], base)


def test_peel_order_lists_removed_vertices():
    sigma, G = graphs.gen_planted_p(200, 3, 6.0, 4)
    res = core(G, sigma, 3, 3)
    assert sorted(res.peel_order) == np.flatnonzero(~res.members).tolist()
