"""Structural diagnostics: shattering, wired boundaries, WSM gaps, phase occupancy, coupling."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .graphgen import (DFS_BUDGET, BudgetExceeded, Multigraph, ball as make_ball,
                       find_avoiding_path, graph_components)
from .rcdyn import (CoupledChains, EdgeConfig, MarginalEstimate, PhaseRestriction, Trace,
                    ball_marginal, run_chain)
from .rng import as_rng


# -- shattering -----------------------------------------------------------------

@dataclass(frozen=True)
class ShatterReport:
    v: int
    radius: int
    sphere_size: int
    components_hit: int
    K_min: int
    nontrivial_components: list


def shatter_report(G: Multigraph, F: EdgeConfig, v: int, radius: int) -> ShatterReport:
    """How many sphere vertices share a component of (V, F minus ball edges)."""
    B = make_ball(G, v, radius)
    mask = F.member.copy()
    if B.edges:
        mask[list(B.edges)] = False
    lab = graph_components(G, mask)
    hits: dict[int, int] = {}
    for x in B.sphere:
        L = int(lab.labels[x])
        hits[L] = hits.get(L, 0) + 1
    s = len(B.sphere)
    nontrivial = sorted((L, c) for L, c in hits.items() if c >= 2)
    return ShatterReport(v, radius, s, len(hits), s - len(hits), nontrivial)


# -- wired boundary ---------------------------------------------------------------

@dataclass(frozen=True)
class WiredBoundaryReport:
    v: int
    radius: int
    exists: bool
    witness: frozenset | None        # the cut set S
    via_path_criterion: bool         # no length-radius path avoids C_1
    verified: bool                   # S checked directly against the definition
    counter_path: list | None = None
    budget_exceeded: bool = False


def largest_component_without(G: Multigraph, F: EdgeConfig, v: int) -> set:
    """Vertex set of the largest component of (V - v, F - edges at v).

    Ties go to the component with the smallest vertex id.
    """
    mask = F.member.copy()
    mask[(G.edge_u == v) | (G.edge_v == v)] = False
    lab = graph_components(G, mask)
    sizes = dict(lab.sizes)
    sizes.pop(int(lab.labels[v]), None)  # v is isolated here
    if not sizes:
        return set()
    best = min(sizes, key=lambda k: (-sizes[k], k))
    return set(np.flatnonzero(lab.labels == best).tolist())


def first_hit_set(G: Multigraph, v: int, radius: int, target: set, budget: int = DFS_BUDGET) -> set:
    """First ``target`` vertex on every simple path of exactly ``radius`` edges from v."""
    adj = G.adjacency
    S: set = set()
    visited = 0
    path = [v]
    on_path = {v}
    stack = [iter(adj[v])]
    while stack:
        advanced = False
        for y, _ in stack[-1]:
            visited += 1
            if visited > budget:
                raise BudgetExceeded(f"first-hit enumeration exceeded {budget} states")
            if y in on_path:
                continue
            depth = len(path)
            if y in target:
                if y not in S:
                    rest = radius - depth
                    if rest == 0 or find_avoiding_path(G, y, rest, on_path, budget) is not None:
                        S.add(y)
                continue
            if depth == radius:
                continue
            path.append(y)
            on_path.add(y)
            stack.append(iter(adj[y]))
            advanced = True
            break
        if not advanced:
            stack.pop()
            on_path.discard(path.pop())
    return S


def verify_wired(G: Multigraph, F: EdgeConfig, v: int, radius: int, S) -> bool:
    """Check the two defining conditions of a wired boundary directly."""
    S = set(S)
    if v in S:
        return False
    dist = make_ball(G, v, radius).dist
    if not S.issubset(dist):
        return False
    # component of v in G - S, using every graph edge
    adj = G.adjacency
    Cv = {v}
    stack = [v]
    while stack:
        x = stack.pop()
        for y, _ in adj[x]:
            if y not in Cv and y not in S:
                Cv.add(y)
                stack.append(y)
    if not Cv.issubset(dist):
        return False
    if len(S) <= 1:
        return True
    inside = np.zeros(G.n, dtype=bool)
    inside[list(Cv)] = True
    mask = F.member & ~inside[G.edge_u] & ~inside[G.edge_v]
    lab = graph_components(G, mask)
    return len({int(lab.labels[x]) for x in S}) == 1


def wired_boundary(G: Multigraph, F: EdgeConfig, v: int, radius: int, budget: int = DFS_BUDGET) -> WiredBoundaryReport:
    """Look for a wired boundary via the giant-avoiding path criterion, then verify it."""
    if radius < 1:
        raise ValueError("radius must be at least 1")
    C1 = largest_component_without(G, F, v)
    try:
        path = find_avoiding_path(G, v, radius, C1, budget)
        if path is not None:
            return WiredBoundaryReport(v, radius, False, None, False, False, counter_path=path)
        S = first_hit_set(G, v, radius, C1, budget)
    except BudgetExceeded:
        return WiredBoundaryReport(v, radius, False, None, False, False, budget_exceeded=True)
    ok = verify_wired(G, F, v, radius, S)
    return WiredBoundaryReport(v, radius, ok, frozenset(S), True, ok)


# -- WSM gap --------------------------------------------------------------------

@dataclass(frozen=True)
class WSMGap:
    gap: float
    stderr: float
    ball: MarginalEstimate
    phase: MarginalEstimate


def phase_marginals(G: Multigraph, phase: str, q: int, p: float, T: int, replicas: int, seed,
                    d: int | None = None, burn_in: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-edge time-averaged inclusion under the phase-restricted full chain.

    Returns (mean, standard error) arrays over independent replicas.
    """
    d = G.d if d is None else d
    restr = PhaseRestriction.for_phase(phase, q, d, G)
    init = "all-out" if phase == "disordered" else "all-in"
    rng = as_rng(seed)
    ests = np.empty((replicas, G.m))
    for r in range(replicas):
        tr, _ = run_chain(G, init, q, p, T, rng.integers(0, 2**63 - 1), restriction=restr, d=d,
                          burn_in=burn_in, track_marginals=True, observe=False)
        ests[r] = tr.marginals
    se = ests.std(axis=0, ddof=1) / math.sqrt(replicas) if replicas > 1 else np.full(G.m, np.nan)
    return ests.mean(axis=0), se


def phase_marginal(G: Multigraph, e: int, phase: str, q: int, p: float, T: int, replicas: int, seed,
                   d: int | None = None, burn_in: int | None = None) -> MarginalEstimate:
    """Time-averaged inclusion of e under the phase-restricted full chain."""
    mean, se = phase_marginals(G, phase, q, p, T, replicas, seed, d, burn_in)
    return MarginalEstimate(float(mean[e]), float(se[e]), replicas)


def wsm_gap(G: Multigraph, v: int, e: int, radius: int, phase: str, q: int, p: float,
            T_ball: int, T_full: int, replicas: int, seed, d: int | None = None) -> WSMGap:
    """|ball-chain marginal - phase-restricted full-chain marginal| for edge e at v.

    The disordered phase pairs with the free boundary, the ordered with the wired.
    """
    if e not in {x for _, x in G.adjacency[v]}:
        raise ValueError(f"edge {e} is not incident to {v}")
    rng = as_rng(seed)
    boundary = "free" if phase == "disordered" else "wired"
    b = ball_marginal(G, v, radius, boundary, q, p, e, T_ball, replicas, rng.integers(0, 2**63 - 1))
    f = phase_marginal(G, e, phase, q, p, T_full, replicas, rng.integers(0, 2**63 - 1), d=d)
    return WSMGap(abs(b.mean - f.mean), math.hypot(b.stderr, f.stderr), b, f)


# -- phase occupancy ------------------------------------------------------------

@dataclass(frozen=True)
class Occupancy:
    disordered: float
    ordered: float
    neither: float
    samples: int


def phase_occupancy(trace: Trace, burn_in: int | None = None) -> Occupancy:
    """Fractions of observations (at steps >= burn_in, default half the run) in each window."""
    steps = np.asarray(trace.steps)
    burn_in = (steps[-1] // 2 if len(steps) else 0) if burn_in is None else burn_in
    labels = [lab for s, lab in zip(trace.steps, trace.phase) if s >= burn_in]
    k = len(labels)
    if k == 0:
        return Occupancy(0.0, 0.0, 0.0, 0)
    dis = sum(lab == "dis" for lab in labels) / k
    ord_ = sum(lab == "ord" for lab in labels) / k
    return Occupancy(dis, ord_, 1.0 - dis - ord_, k)


# -- coupling time ----------------------------------------------------------------

@dataclass(frozen=True)
class CouplingResult:
    steps: int
    timed_out: bool


def coupling_time(G: Multigraph, q: float, p: float, T_max: int, seed) -> CouplingResult:
    """Steps until grand-coupled all-in and all-out chains coincide (or TimedOut at T_max)."""
    cc = CoupledChains([EdgeConfig.all_in(G), EdgeConfig(G)], q, p, seed)
    if cc.diff() == 0:
        return CouplingResult(0, False)
    taken = cc.run(T_max, stop_when_equal=True)
    if cc.diff() == 0:
        return CouplingResult(taken, False)
    return CouplingResult(T_max, True)


# -- CSV ----------------------------------------------------------------------------

def rows_to_csv(fieldnames: list[str], rows, header: str = "") -> str:
    buf = io.StringIO()
    buf.write(header)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fieldnames)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()
