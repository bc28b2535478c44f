"""RC Glauber dynamics: kernel equivalence, stationarity, restrictions, coupling."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rcpotts import oracle
from rcpotts import phasecalc as pc
from rcpotts.graphgen import Multigraph, ball, graph_components, sample_configuration_model
from rcpotts.rcdyn import (
    BallRestriction, ChainState, CoupledChains, EdgeConfig, LazyConnectivity, PhaseRestriction,
    ball_marginal, empirical_law, grand_coupling_step, rc_step, run_chain,
)


def batch_se(x, batches=20):
    x = np.asarray(x, dtype=float)
    means = np.array([b.mean() for b in np.array_split(x, batches)])
    return means.std(ddof=1) / math.sqrt(batches)


# -- edge configurations ---------------------------------------------------------

@given(seed=st.integers(0, 2**32), frac=st.floats(0, 1))
@settings(max_examples=40, deadline=None)
def test_is_cut_matches_component_count(seed, frac):
    G = sample_configuration_model(20, 3, seed)
    rng = np.random.default_rng(seed)
    F = EdgeConfig(G, rng.random(G.m) < frac)
    base = graph_components(G, F.member).count
    for e in range(G.m):
        with_e = F.member.copy()
        with_e[e] = True
        without = F.member.copy()
        without[e] = False
        merged = graph_components(G, without).count - graph_components(G, with_e).count
        assert F.is_cut(e) == (merged == 1)
    assert base == F.components().count


def test_self_loop_is_never_cut():
    G = oracle.fixture("self_loop")
    assert not EdgeConfig(G).is_cut(0)
    assert not EdgeConfig.all_in(G).is_cut(0)


@given(seed=st.integers(0, 2**32), ops=st.lists(st.tuples(st.booleans(), st.integers(0, 44)), max_size=200))
@settings(max_examples=30, deadline=None)
def test_lazy_connectivity_matches_bfs(seed, ops):
    G = sample_configuration_model(30, 3, seed)
    lc = LazyConnectivity(EdgeConfig(G))
    rng = np.random.default_rng(seed)
    for add, e in ops:
        lc.add(e) if add else lc.remove(e)
        u, v = rng.integers(0, G.n, 2)
        assert lc.connected(int(u), int(v)) == lc.config.connected(int(u), int(v))


# -- kernel equals reference ------------------------------------------------------

@pytest.mark.parametrize("restricted", [False, True])
def test_kernel_matches_reference_step_for_step(restricted):
    q, d = 3, 3
    G = sample_configuration_model(60, d, 4)
    p = pc.p_of_beta(pc.beta_c(q, d))
    restr = PhaseRestriction.for_phase("ordered", q, d, G) if restricted else None
    fast = ChainState(G, EdgeConfig.all_in(G), q, p, 1, restr)
    ref = ChainState(G, EdgeConfig.all_in(G), q, p, 1, restr)
    rng = np.random.default_rng(9)
    for _ in range(50):
        k = int(rng.integers(1, 200))
        choices, us = rng.integers(0, G.m, k), rng.random(k)
        fast.advance(choices, us)
        for c, u in zip(choices, us):
            rc_step(ref, (c, u))
        assert np.array_equal(fast.config.member, ref.config.member)
        assert fast.size == ref.size == ref.config.size
        if restricted:
            assert restr.allows(fast.size)


def test_marginal_accumulator_matches_time_average():
    G = oracle.fixture("k4")
    st_ = ChainState(G, EdgeConfig(G), 2, 0.5, 3)
    st_.start_marginals()
    choices, us = st_.draw(5000)
    ref = ChainState(G, EdgeConfig(G), 2, 0.5, 3)
    occ = np.zeros(G.m)
    for c, u in zip(choices, us):
        rc_step(ref, (c, u))
        occ += ref.config.member
    st_.advance(choices, us)
    assert np.allclose(st_.marginals(), occ / 5000)


# -- stationarity -------------------------------------------------------------------

def test_single_edge_inclusion_frequency():
    q, p, T = 3, 0.6, 10**6
    law = empirical_law(oracle.fixture("single_edge"), q, p, T, 2)
    ph = pc.p_hat(p, q)
    # every step resamples the only edge, so the recorded states are iid
    assert abs(law[1] - ph) < 3 * math.sqrt(ph * (1 - ph) / (0.9 * T))


def test_self_loop_inclusion_frequency():
    p, T = 0.37, 10**6
    law = empirical_law(oracle.fixture("self_loop"), 3, p, T, 2)
    assert abs(law[1] - p) < 3 * math.sqrt(p * (1 - p) / (0.9 * T))


def test_triangle_law():
    G = oracle.fixture("triangle")
    law = empirical_law(G, 2, 0.5, 10**7, 5)
    assert oracle.exact_tv(oracle.exact_rc(G, 2, 0.5), law) < 0.01


def test_zero_steps_trace():
    G = oracle.fixture("k4")
    tr, _ = run_chain(G, "all-out", 2, 0.5, 0, 1)
    assert tr.steps == [0] and tr.size == [0]


def test_p_one_absorbs_into_all_in():
    G = sample_configuration_model(30, 3, 1)
    _, st_ = run_chain(G, "all-out", 3, 1.0, 20 * G.m, 1, observe=False)
    assert st_.config.member.all()


def test_two_initialisations_agree():
    n, q, d = 500, 3, 3
    G = sample_configuration_model(n, d, 7)
    p = pc.p_of_beta(0.5 * pc.beta_c(q, d))
    T = int(40 * n * math.log(n))
    dens = {}
    for init in ("all-out", "all-in"):
        tr, _ = run_chain(G, init, q, p, T, 11, stride=n // 5)
        post = np.array(tr.size[len(tr.size) // 2:]) / n
        dens[init] = (post.mean(), batch_se(post))
    (a, sa), (b, sb) = dens.values()
    assert abs(a - b) < 3 * math.hypot(sa, sb) + 1e-3


# -- restrictions ----------------------------------------------------------------------

def test_phase_restriction_keeps_size_in_window():
    q, d, n = 20, 5, 300
    G = sample_configuration_model(n, d, 2)
    p = pc.p_of_beta(pc.beta_c(q, d))
    for phase, init in (("disordered", "all-out"), ("ordered", "all-in")):
        restr = PhaseRestriction.for_phase(phase, q, d, G)
        tr, _ = run_chain(G, init, q, p, 50 * n, 3, restriction=restr, stride=7)
        assert all(restr.allows(s) for s in tr.size)


def test_restricted_start_outside_window_rejected():
    q, d = 20, 5
    G = sample_configuration_model(100, d, 2)
    restr = PhaseRestriction.for_phase("ordered", q, d, G)
    with pytest.raises(ValueError):
        ChainState(G, EdgeConfig(G), q, 0.5, 1, restr)


def test_ball_restriction_freezes_outside():
    G = sample_configuration_model(80, 3, 5)
    B = ball(G, 0, 2)
    for boundary in ("free", "wired"):
        st_ = ChainState(G, EdgeConfig(G), 3, 0.6, 1, BallRestriction(B, boundary))
        st_.run(5000)
        outside = np.ones(G.m, dtype=bool)
        outside[list(B.edges)] = False
        assert np.all(st_.config.member[outside] == (boundary == "wired"))


def test_ball_marginal_isolated_edge_is_p_hat():
    G = Multigraph.from_edges(4, [(0, 1), (2, 3)])
    q, p = 3, 0.6
    est = ball_marginal(G, 0, 1, "free", q, p, 0, 40000, 8, 1)
    assert abs(est.mean - pc.p_hat(p, q)) < 3 * est.stderr + 1e-3


def test_ball_marginal_whole_graph_matches_exact():
    G = oracle.fixture("petersen8")
    q, p = 2, 0.5
    est = ball_marginal(G, 0, 10, "free", q, p, 3, 40000, 8, 2)
    exact = oracle.exact_rc(G, q, p).marginals[3]
    assert abs(est.mean - exact) < 3 * est.stderr + 2e-3


# -- grand coupling ---------------------------------------------------------------------

def test_monotone_coupling_preserves_order():
    G = sample_configuration_model(100, 3, 3)
    rng = np.random.default_rng(0)
    mid = EdgeConfig(G, rng.random(G.m) < 0.5)
    low = EdgeConfig(G, mid.member & (rng.random(G.m) < 0.5))
    cc = CoupledChains([EdgeConfig(G), low, mid, EdgeConfig.all_in(G)], 3, 0.6, 4)
    cc.run(10**5)
    cfgs = cc.configs()
    assert cc.violations == 0
    assert all(cfgs[k].issubset(cfgs[k + 1]) for k in range(3))


def test_reference_coupling_matches_kernel():
    G = sample_configuration_model(30, 3, 3)
    p, q = 0.6, 3
    ref = [ChainState(G, EdgeConfig(G), q, p, 0), ChainState(G, EdgeConfig.all_in(G), q, p, 0)]
    cc = CoupledChains([EdgeConfig(G), EdgeConfig.all_in(G)], q, p, 0)
    rng = np.random.default_rng(1)
    choices, us = rng.integers(0, G.m, 3000), rng.random(3000)
    cc.advance(choices, us)
    for c, u in zip(choices, us):
        grand_coupling_step(ref, (c, u))
    for row, s in zip(cc.members, ref):
        assert np.array_equal(row, s.config.member)


def test_identical_states_stay_identical():
    G = sample_configuration_model(40, 3, 3)
    F = EdgeConfig(G, np.random.default_rng(2).random(G.m) < 0.4)
    cc = CoupledChains([F, F.copy()], 3, 0.5, 1)
    cc.run(5000)
    assert cc.diff() == 0


def test_single_edge_coalesces_at_first_step():
    G = oracle.fixture("single_edge")
    cc = CoupledChains([EdgeConfig(G), EdgeConfig.all_in(G)], 3, 0.5, 1)
    assert cc.run(10, stop_when_equal=True) == 1
