"""Configuration-model sampling, balls, components and avoiding paths."""

import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rcpotts.graphgen import (
    BudgetExceeded, Multigraph, UnionFind, ball, components, exists_avoiding_path,
    find_avoiding_path, graph_components, random_pairings, sample_configuration_model,
    sample_exact_edge_model,
)

# Frozen from exhaustive enumeration of all 11!! = 10395 pairings of 12 half-edges.
SIMPLE_FRACTION_N4_D3 = 48 / 385
# Frozen from enumeration of all 13860 (6-subset, matching) pairs on degrees (3,3,3,3).
EXACT_EDGE_COMPONENT_LAW = {
    (4,): 18 / 55, (3, 1): 30 / 77, (2, 2): 54 / 385, (2, 1, 1): 52 / 385, (1, 1, 1, 1): 3 / 385,
}


def cycle(n):
    return Multigraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)], d=2)


# -- samplers -----------------------------------------------------------------

def test_single_edge_model():
    G = sample_configuration_model(2, 1, 0)
    assert G.m == 1 and sorted((int(G.edge_u[0]), int(G.edge_v[0]))) == [0, 1]


def test_single_self_loop():
    G = sample_configuration_model(1, 2, 0)
    assert G.m == 1 and G.edge_u[0] == 0 and G.edge_v[0] == 0


def test_odd_degree_sum_rejected():
    with pytest.raises(ValueError):
        sample_configuration_model(3, 3, 0)


@given(n=st.integers(1, 40), d=st.integers(1, 6), seed=st.integers(0, 2**32))
@settings(max_examples=60, deadline=None)
def test_configuration_model_is_d_regular(n, d, seed):
    if (n * d) % 2:
        return
    G = sample_configuration_model(n, d, seed)
    assert G.m == n * d // 2
    assert np.all(G.degrees == d)
    assert np.all(G.pairing[G.pairing] == np.arange(n * d))
    assert not G.free_half_edges


def test_same_seed_same_graph():
    a = sample_configuration_model(50, 3, 11)
    b = sample_configuration_model(50, 3, 11)
    assert a.to_text() == b.to_text()


def test_simple_fraction_matches_enumeration():
    trials = 10**5
    P = random_pairings(12, trials, 123)
    owner = np.arange(12) // 3
    u = owner[np.arange(12)][None, :].repeat(trials, axis=0)
    v = owner[P]
    loops = (u == v).any(axis=1)
    # simple iff no loop and all 6 unordered vertex pairs appear once
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    code = np.sort(lo * 4 + hi, axis=1)[:, ::2]
    distinct = (np.diff(code, axis=1) != 0).all(axis=1)
    frac = float(np.mean(~loops & distinct))
    se = math.sqrt(SIMPLE_FRACTION_N4_D3 * (1 - SIMPLE_FRACTION_N4_D3) / trials)
    assert abs(frac - SIMPLE_FRACTION_N4_D3) < 3 * se


def test_exact_edge_forced_and_empty():
    G = sample_exact_edge_model((1, 1), 1, 0)
    assert G.m == 1 and {int(G.edge_u[0]), int(G.edge_v[0])} == {0, 1}
    E = sample_exact_edge_model((2, 2, 2), 0, 0)
    assert E.m == 0 and E.n == 3 and len(E.free_half_edges) == 6


def test_exact_edge_component_law():
    trials = 20000
    rng = np.random.default_rng(5)
    counts = Counter()
    for _ in range(trials):
        G = sample_exact_edge_model((3, 3, 3, 3), 3, rng)
        counts[tuple(sorted(graph_components(G).sizes.values(), reverse=True))] += 1
    for key, p in EXACT_EDGE_COMPONENT_LAW.items():
        se = math.sqrt(p * (1 - p) / trials)
        assert abs(counts[key] / trials - p) < 3.5 * se, key


def test_text_round_trip_with_free_half_edges():
    G = sample_exact_edge_model((3, 3, 3, 3, 2), 4, 9)
    H = Multigraph.from_text(G.to_text())
    assert H.to_text() == G.to_text()
    assert np.array_equal(H.degrees, G.degrees)


def test_text_reader_skips_header():
    G = cycle(5)
    H = Multigraph.from_text("# rcpotts 0.1.0\n# config {}\n" + G.to_text())
    assert H.edges() == G.edges()


# -- balls ----------------------------------------------------------------------

def test_ball_radius_zero_excludes_self_loop():
    G = Multigraph.from_edges(2, [(0, 0), (0, 1)])
    B = ball(G, 0, 0)
    assert set(B.vertices) == {0}
    assert not B.edges


def test_ball_on_six_cycle():
    B = ball(cycle(6), 0, 2)
    assert len(B.vertices) == 5 and len(B.edges) == 4
    assert len(B.sphere) == 2 and B.excess == 0


def test_ball_on_k4():
    G = Multigraph.from_edges(4, [(a, b) for a in range(4) for b in range(a + 1, 4)])
    B = ball(G, 0, 1)
    assert len(B.vertices) == 4 and len(B.edges) == 6 and B.excess == 3


@given(seed=st.integers(0, 2**32), r=st.integers(0, 4))
@settings(max_examples=40, deadline=None)
def test_ball_edges_are_induced_and_nested(seed, r):
    G = sample_configuration_model(30, 3, seed)
    B = ball(G, 0, r)
    B2 = ball(G, 0, r + 1)
    assert set(B.vertices) <= set(B2.vertices) and set(B.edges) <= set(B2.edges)
    for e in B.edges:
        assert int(G.edge_u[e]) in B.vertices and int(G.edge_v[e]) in B.vertices
    for x in B.sphere:
        assert B.dist[x] == r


# -- components -----------------------------------------------------------------

def test_components_trivial_cases():
    lab = components(4, [])
    assert lab.count == 4 and set(lab.sizes.values()) == {1}
    lab = components(3, [(0, 1), (1, 2)])
    assert lab.count == 1 and list(lab.sizes.values()) == [3]
    lab = components(5, [(0, 1), (2, 3)])
    assert lab.count == 3 and sorted(lab.sizes.values()) == [1, 2, 2]


@given(n=st.integers(1, 25), edges=st.lists(st.tuples(st.integers(0, 24), st.integers(0, 24)), max_size=40))
@settings(max_examples=80, deadline=None)
def test_components_agree_with_union_find(n, edges):
    edges = [(a % n, b % n) for a, b in edges]
    lab = components(n, edges)
    uf = UnionFind(n)
    for a, b in edges:
        uf.union(a, b)
    assert lab.count == uf.count
    for a in range(n):
        for b in range(n):
            assert (lab.labels[a] == lab.labels[b]) == (uf.find(a) == uf.find(b))


# -- avoiding paths ---------------------------------------------------------------

def test_avoiding_path_trivial_cases():
    C = cycle(6)
    assert exists_avoiding_path(C, 0, 0, set())
    assert not exists_avoiding_path(C, 0, 0, {0})
    assert exists_avoiding_path(C, 0, 5, set())
    assert not exists_avoiding_path(C, 0, 6, set())
    star = Multigraph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    assert not exists_avoiding_path(star, 1, 1, {0})


def test_avoiding_path_is_simple_and_avoids():
    G = sample_configuration_model(40, 3, 2)
    forbidden = {5, 6, 7}
    path = find_avoiding_path(G, 0, 4, forbidden)
    if path is not None:
        assert len(path) == 5 and len(set(path)) == 5
        assert not set(path) & forbidden
        adj = G.adjacency
        for a, b in zip(path, path[1:]):
            assert b in {y for y, _ in adj[a]}


def test_avoiding_path_budget():
    G = sample_configuration_model(200, 4, 1)
    with pytest.raises(BudgetExceeded):
        find_avoiding_path(G, 0, 300, set(), budget=50)
