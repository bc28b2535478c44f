"""Brute-force oracles: exact laws, Edwards-Sokal, transition matrices, golden files."""

import itertools
import math
import shutil

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rcpotts import oracle
from rcpotts.graphgen import Multigraph
from rcpotts.phasecalc import p_hat


def brute_rc(G, q, p):
    """Independent RC law by explicit loops over subsets with a tiny union-find."""
    w = []
    for bits in itertools.product((0, 1), repeat=G.m):
        parent = list(range(G.n))

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x
        for e, b in enumerate(bits):
            if b:
                a, c = find(int(G.edge_u[e])), find(int(G.edge_v[e]))
                parent[a] = c
        comps = len({find(x) for x in range(G.n)})
        k = sum(bits)
        w.append(q ** comps * p ** k * (1 - p) ** (G.m - k))
    # product order has edge 0 most significant; masks have edge 0 as bit 0
    out = np.zeros(1 << G.m)
    for idx, bits in enumerate(itertools.product((0, 1), repeat=G.m)):
        out[sum(b << e for e, b in enumerate(bits))] = w[idx]
    return out / out.sum()


# -- exact Potts ----------------------------------------------------------------

def test_potts_uniform_at_zero_beta():
    ex = oracle.exact_potts(oracle.fixture("triangle"), 3, 0.0)
    assert np.allclose(ex.probs, 1 / 27)


@pytest.mark.parametrize("beta", [0.0, 0.4, 2.0])
def test_potts_single_edge(beta):
    ex = oracle.exact_potts(oracle.fixture("single_edge"), 2, beta)
    mono = ex.support[:, 0] == ex.support[:, 1]
    assert abs(ex.probs[mono].sum() - math.exp(beta) / (math.exp(beta) + 1)) < 1e-14


def test_potts_triangle_q2_beta1():
    # 2 monochromatic colourings with 3 equal edges, 6 with exactly 1
    Z = 2 * math.e ** 3 + 6 * math.e
    ex = oracle.exact_potts(oracle.fixture("triangle"), 2, 1.0)
    assert abs(ex.logZ - math.log(Z)) < 1e-13


# -- exact RC -------------------------------------------------------------------

@pytest.mark.parametrize("name", oracle.FIXTURE_NAMES)
@pytest.mark.parametrize("q,p", [(2, 0.3), (3, 0.7), (2.5, 0.5)])
def test_exact_rc_matches_brute_force(name, q, p):
    G = oracle.fixture(name)
    assert np.allclose(oracle.exact_rc(G, q, p).probs, brute_rc(G, q, p), atol=1e-14)


@given(q=st.floats(0.5, 10), p=st.floats(0.01, 0.99))
@settings(max_examples=50, deadline=None)
def test_single_edge_inclusion_is_p_hat(q, p):
    ex = oracle.exact_rc(oracle.fixture("single_edge"), q, p)
    assert abs(ex.marginals[0] - p_hat(p, q)) < 1e-12


def test_self_loop_inclusion_is_p():
    ex = oracle.exact_rc(oracle.fixture("self_loop"), 3, 0.37)
    assert abs(ex.marginals[0] - 0.37) < 1e-14


def test_p_one_is_point_mass_on_all_in():
    ex = oracle.exact_rc(oracle.fixture("k4"), 3, 1.0)
    assert ex.probs[-1] == pytest.approx(1.0) and ex.probs[:-1].sum() == pytest.approx(0.0)


def test_triangle_marginals_match_edwards_sokal_by_hand():
    G = oracle.fixture("triangle")
    q, p = 3, 0.4
    beta = -math.log1p(-p)
    marg = np.zeros(3)
    Z = 0.0
    for sigma in itertools.product(range(q), repeat=3):
        mono = [sigma[int(G.edge_u[e])] == sigma[int(G.edge_v[e])] for e in range(3)]
        w = math.exp(beta * sum(mono))
        Z += w
        marg += w * p * np.array(mono, dtype=float)
    assert np.allclose(oracle.exact_rc(G, q, p).marginals, marg / Z, atol=1e-12)


@pytest.mark.parametrize("name", oracle.FIXTURE_NAMES)
def test_edwards_sokal_pushforward_is_exact(name):
    G = oracle.fixture(name)
    for q in (2, 3):
        for p in (0.3, 0.7):
            assert oracle.exact_tv(oracle.exact_rc(G, q, p), oracle.edwards_sokal_pushforward(G, q, p)) < 1e-12


# -- total variation ----------------------------------------------------------------

def test_tv_trivial_values():
    a = np.array([0.2, 0.3, 0.5])
    assert oracle.exact_tv(a, a) == 0
    assert oracle.exact_tv([1, 0], [0, 1]) == 1
    k = 5
    assert abs(oracle.exact_tv(np.full(k, 1 / k), np.eye(k)[0]) - (1 - 1 / k)) < 1e-15
    with pytest.raises(ValueError):
        oracle.exact_tv([1.0], [0.5, 0.5])


# -- transition matrices ---------------------------------------------------------------

def test_single_edge_transition_matrix():
    q, p = 3, 0.6
    P = oracle.transition_matrix(oracle.fixture("single_edge"), q, p)
    ph = p_hat(p, q)
    pi = np.array([1 - ph, ph])
    assert np.allclose(pi @ P, pi, atol=1e-15)


def test_parallel_edges_stationary():
    rep = oracle.exact_transition_check(oracle.fixture("parallel_edges"), 2, 0.45)
    assert rep.stationarity_residual < 1e-10 and rep.irreducible


def test_path_detailed_balance():
    rep = oracle.exact_transition_check(oracle.fixture("path3"), 3, 0.3)
    assert rep.reversibility_residual < 1e-10


@pytest.mark.parametrize("name", oracle.FIXTURE_NAMES)
def test_every_fixture_is_stationary(name):
    for q in (2, 3):
        for p in (0.3, 0.7):
            assert oracle.exact_transition_check(oracle.fixture(name), q, p).ok()


def test_too_large_instances_rejected():
    G = Multigraph.from_edges(30, [(i, (i + 1) % 30) for i in range(30)])
    with pytest.raises(oracle.InstanceTooLarge):
        oracle.exact_rc(G, 2, 0.5)


# -- golden files -----------------------------------------------------------------------

def test_golden_files_verify():
    checks = oracle.verify_golden()
    assert len(checks) == len(oracle.FIXTURE_NAMES) * 8
    assert all(c.ok for c in checks)


def test_corrupted_golden_is_detected(tmp_path):
    src = oracle._golden_dir()
    shutil.copytree(src, tmp_path / "g")
    target = tmp_path / "g" / oracle.golden_name("rc", "k4", 3, 0.7)
    lines = target.read_text().splitlines()
    idx, val = lines[5].split(",")
    lines[5] = f"{idx},{float(val) + 1e-6}"
    target.write_text("\n".join(lines) + "\n")
    bad = [c for c in oracle.verify_golden(tmp_path / "g") if not c.ok]
    assert [c.fixture for c in bad] == ["k4"]


def test_pairing_enumeration_count():
    for H in (0, 2, 4, 6, 8):
        assert sum(1 for _ in oracle.enumerate_pairings(list(range(H)))) == oracle.count_pairings(H)
