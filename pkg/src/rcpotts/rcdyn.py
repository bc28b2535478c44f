"""Random-cluster single-edge dynamics, restricted variants and the grand coupling.

One step picks an edge ``e`` uniformly; if ``e`` is a cut edge of
``(V, X + e)`` it is included with probability ``p_hat = p/((1-p)q + p)``,
otherwise with probability ``p``.  Self-loops are never cut edges.

The bulk of the work happens in the numba kernels of ``_kernels``; the pure
Python ``rc_step`` is the reference implementation used to test them.
"""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .graphgen import Ball, Multigraph, UnionFind, ball as make_ball, graph_components
from .phasecalc import p_hat as _p_hat, phase_windows
from .rng import as_rng

CHUNK = 1 << 16


def graph_arrays(G: Multigraph) -> dict:
    """Flat arrays consumed by the kernels (cached on the graph object)."""
    cached = G.__dict__.get("_kernel_arrays")
    if cached is not None:
        return cached
    he_nbr = np.full(G.num_half_edges, -1, dtype=np.int64)
    matched = G.pairing >= 0
    he_nbr[matched] = G.he_vertex[G.pairing[matched]]
    arrs = {
        "offsets": G.offsets.astype(np.int64),
        "he_edge": G.he_edge.astype(np.int64),
        "he_nbr": he_nbr,
        "edge_u": G.edge_u.astype(np.int64),
        "edge_v": G.edge_v.astype(np.int64),
    }
    object.__setattr__(G, "_kernel_arrays", arrs)
    return arrs


class EdgeConfig:
    """A subset F of the edge ids of ``G``, stored as a boolean mask."""

    def __init__(self, G: Multigraph, member=None):
        self.G = G
        if member is None:
            member = np.zeros(G.m, dtype=np.bool_)
        member = np.asarray(member, dtype=np.bool_)
        if member.shape != (G.m,):
            raise ValueError("membership mask must have one entry per edge")
        self.member = member.copy()

    @classmethod
    def all_in(cls, G: Multigraph) -> "EdgeConfig":
        return cls(G, np.ones(G.m, dtype=np.bool_))

    @classmethod
    def from_ids(cls, G: Multigraph, ids) -> "EdgeConfig":
        mask = np.zeros(G.m, dtype=np.bool_)
        mask[list(ids)] = True
        return cls(G, mask)

    @property
    def size(self) -> int:
        return int(self.member.sum())

    def ids(self) -> np.ndarray:
        return np.flatnonzero(self.member)

    def copy(self) -> "EdgeConfig":
        return EdgeConfig(self.G, self.member)

    def bitmask(self) -> int:
        return int(sum(1 << int(e) for e in self.ids()))

    def __eq__(self, other) -> bool:
        return isinstance(other, EdgeConfig) and other.G is self.G and np.array_equal(other.member, self.member)

    def issubset(self, other: "EdgeConfig") -> bool:
        return not np.any(self.member & ~other.member)

    def add(self, e: int) -> None:
        self.member[e] = True

    def remove(self, e: int) -> None:
        self.member[e] = False

    def connected(self, u: int, v: int, exclude: int | None = None) -> bool:
        """BFS query: are u and v joined in (V, F), optionally without edge ``exclude``?"""
        if u == v:
            return True
        adj = self.G.adjacency
        seen = {u}
        queue = deque([u])
        member = self.member
        while queue:
            x = queue.popleft()
            for y, e in adj[x]:
                if e == exclude or not member[e] or y in seen:
                    continue
                if y == v:
                    return True
                seen.add(y)
                queue.append(y)
        return False

    def is_cut(self, e: int) -> bool:
        """Whether ``e`` is a cut edge of (V, F + e)."""
        u, v = int(self.G.edge_u[e]), int(self.G.edge_v[e])
        return not self.connected(u, v, exclude=e)

    def components(self):
        return graph_components(self.G, self.member)


class LazyConnectivity:
    """Union-find over F that tolerates deletions by rebuilding lazily.

    Additions are applied immediately.  Deletions are journaled; while the
    journal is non-empty a query falls back to BFS, and the structure is
    rebuilt once the journal exceeds ``sqrt(|E|)`` entries.
    """

    def __init__(self, config: EdgeConfig):
        self.config = config
        self.limit = max(1, int(math.isqrt(max(config.G.m, 1))))
        self._rebuild()

    def _rebuild(self) -> None:
        G = self.config.G
        self.uf = UnionFind(G.n)
        for e in self.config.ids():
            self.uf.union(int(G.edge_u[e]), int(G.edge_v[e]))
        self.journal: list[int] = []

    def add(self, e: int) -> None:
        self.config.add(e)
        self.uf.union(int(self.config.G.edge_u[e]), int(self.config.G.edge_v[e]))

    def remove(self, e: int) -> None:
        if self.config.member[e]:
            self.config.remove(e)
            self.journal.append(e)
            if len(self.journal) > self.limit:
                self._rebuild()

    def connected(self, u: int, v: int) -> bool:
        if not self.journal:
            return self.uf.find(u) == self.uf.find(v)
        # DSU gives a superset of connectivity once edges were removed
        if self.uf.find(u) != self.uf.find(v):
            return False
        return self.config.connected(u, v)


# -- restrictions -------------------------------------------------------------

@dataclass(frozen=True)
class PhaseRestriction:
    """Edge-count window: disordered means |F| <= dis_max, ordered |F| >= ord_min."""

    phase: str
    lo: int
    hi: int

    @classmethod
    def for_phase(cls, phase: str, q: int, d: int, G: Multigraph) -> "PhaseRestriction":
        dis_max, ord_min = phase_windows(q, d, G.n)
        if phase == "disordered":
            return cls("disordered", 0, int(math.floor(dis_max)))
        if phase == "ordered":
            return cls("ordered", int(math.ceil(ord_min)), G.m)
        raise ValueError(f"unknown phase {phase!r}")

    def allows(self, size: int) -> bool:
        return self.lo <= size <= self.hi


@dataclass(frozen=True)
class BallRestriction:
    """Updates confined to ball edges; outside edges fixed in (wired) or out (free)."""

    ball: Ball
    boundary: str

    def __post_init__(self):
        if self.boundary not in ("free", "wired"):
            raise ValueError("boundary must be 'free' or 'wired'")


@dataclass
class StepReport:
    edge: int
    proposed_in: bool
    accepted: bool
    was_cut: bool
    rejected_by_restriction: bool = False


class ChainState:
    """Single-owner state of one RC chain."""

    def __init__(self, G: Multigraph, config: EdgeConfig, q: float, p: float, seed, restriction=None):
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        self.G = G
        self.config = config
        self.q = q
        self.p = p
        self.p_hat = _p_hat(p, q)
        self.rng = as_rng(seed)
        self.step_count = 0
        self.restriction = restriction
        if isinstance(restriction, BallRestriction):
            self.pool = np.array(sorted(restriction.ball.edges), dtype=np.int64)
            fixed = np.ones(G.m, dtype=np.bool_)
            fixed[self.pool] = False
            self.config.member[fixed] = restriction.boundary == "wired"
        else:
            self.pool = np.arange(G.m, dtype=np.int64)
        if isinstance(restriction, PhaseRestriction):
            self.lo, self.hi = restriction.lo, restriction.hi
            if not restriction.allows(config.size):
                raise ValueError(f"initial |F|={config.size} lies outside the {restriction.phase} window")
        else:
            self.lo, self.hi = 0, G.m
        self._size = config.size
        self._stamp = 0
        self._mark = np.full(G.n, -1, dtype=np.int64)
        self._qa = np.empty(G.n, dtype=np.int64)
        self._qb = np.empty(G.n, dtype=np.int64)
        self.acc = np.zeros(G.m, dtype=np.int64)
        self.since = np.zeros(G.m, dtype=np.int64)
        self._acc_on = False
        self._acc_start = 0

    @property
    def size(self) -> int:
        return self._size

    def draw(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Edge-pool indices and uniforms for the next ``k`` steps."""
        return self.rng.integers(0, len(self.pool), size=k), self.rng.random(k)

    # marginal accumulators -------------------------------------------------
    def start_marginals(self) -> None:
        """Count time-in per edge from the next step on."""
        self.acc[:] = 0
        self.since[:] = self.step_count + 1
        self._acc_on = True
        self._acc_start = self.step_count

    def marginals(self) -> np.ndarray:
        """Per-edge fraction of steps since ``start_marginals`` with the edge in F."""
        if not self._acc_on:
            raise RuntimeError("marginal accumulation was not started")
        span = self.step_count - self._acc_start
        if span == 0:
            return self.config.member.astype(float)
        tot = self.acc + np.where(self.config.member, self.step_count + 1 - self.since, 0)
        return tot / span

    def advance(self, choices: np.ndarray, us: np.ndarray, hist: np.ndarray | None = None, hist_from: int = 0) -> None:
        """Run the kernel on pre-drawn randomness."""
        a = graph_arrays(self.G)
        work = np.array([self._size, self.step_count, self._stamp, 0, 0, 0], dtype=np.int64)
        if hist is None:
            hist = np.zeros(0, dtype=np.int64)
        else:
            work[3] = self.config.bitmask()
        _kernels.run_steps(a["offsets"], a["he_edge"], a["he_nbr"], a["edge_u"], a["edge_v"],
                           self.config.member, self.pool, np.asarray(choices, dtype=np.int64),
                           np.asarray(us, dtype=np.float64), float(self.p), float(self.p_hat),
                           int(self.lo), int(self.hi), work, self._mark, self._qa, self._qb,
                           hist, int(hist_from), self.acc, self.since, self._acc_on)
        self._size = int(work[0])
        self.step_count = int(work[1])
        self._stamp = int(work[2])

    def run(self, T: int, hist: np.ndarray | None = None, hist_from: int = 0) -> None:
        left = int(T)
        while left > 0:
            k = min(left, CHUNK)
            c, u = self.draw(k)
            self.advance(c, u, hist, hist_from)
            left -= k


def rc_step(state: ChainState, choice: tuple[int, float] | None = None) -> StepReport:
    """One update of the chain (pure Python reference path).

    ``choice`` optionally supplies the (pool index, uniform) pair; otherwise it
    is drawn from the state's generator.
    """
    if choice is None:
        idx, U = int(state.rng.integers(0, len(state.pool))), float(state.rng.random())
    else:
        idx, U = int(choice[0]), float(choice[1])
    e = int(state.pool[idx])
    cfg = state.config
    cut = cfg.is_cut(e)
    want = U < (state.p_hat if cut else state.p)
    state.step_count += 1
    accepted = True
    rejected = False
    if want != bool(cfg.member[e]):
        new_size = state._size + (1 if want else -1)
        if new_size < state.lo or new_size > state.hi:
            accepted = False
            rejected = True
        else:
            cfg.member[e] = want
            state._size = new_size
            if state._acc_on:
                if want:
                    state.since[e] = state.step_count
                else:
                    state.acc[e] += state.step_count - state.since[e]
    return StepReport(edge=e, proposed_in=want, accepted=accepted, was_cut=cut, rejected_by_restriction=rejected)


# -- chains with observers ----------------------------------------------------

def initial_config(G: Multigraph, init) -> EdgeConfig:
    if isinstance(init, EdgeConfig):
        return init.copy()
    if init in ("all-out", "out", "AllOut"):
        return EdgeConfig(G)
    if init in ("all-in", "in", "AllIn"):
        return EdgeConfig.all_in(G)
    raise ValueError(f"unknown initial configuration {init!r}")


@dataclass
class Trace:
    steps: list = field(default_factory=list)
    size: list = field(default_factory=list)
    ncomp: list = field(default_factory=list)
    c1: list = field(default_factory=list)
    phase: list = field(default_factory=list)
    marginals: np.ndarray | None = None
    windows: tuple[float, float] | None = None

    def observe(self, step: int, cfg: EdgeConfig, windows) -> None:
        lab = cfg.components()
        self.steps.append(step)
        self.size.append(cfg.size)
        self.ncomp.append(lab.count)
        self.c1.append(lab.largest()[1] if lab.count else 0)
        self.phase.append(phase_label(cfg.size, windows))

    def to_csv(self, header: str = "") -> str:
        buf = io.StringIO()
        if header:
            buf.write(header)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "size", "components", "largest", "phase"])
        for row in zip(self.steps, self.size, self.ncomp, self.c1, self.phase):
            w.writerow(row)
        return buf.getvalue()


def phase_label(size: int, windows) -> str:
    if windows is None:
        return ""
    dis_max, ord_min = windows
    if size <= dis_max:
        return "dis"
    if size >= ord_min:
        return "ord"
    return "neither"


def run_chain(G: Multigraph, init, q: float, p: float, T: int, seed, restriction=None,
              stride: int | None = None, d: int | None = None, burn_in: int | None = None,
              track_marginals: bool = False, observe: bool = True):
    """Run T steps; observe every ``stride`` steps (default n).

    Returns (trace, final ChainState).  ``d`` (default ``G.d``) fixes the
    edge-count windows used for phase labels when q >= 3.
    Marginals, if requested, are time averages after ``burn_in`` (default T/2).
    """
    if T < 0:
        raise ValueError("T must be non-negative")
    stride = G.n if stride is None else max(1, int(stride))
    burn_in = T // 2 if burn_in is None else int(burn_in)
    state = ChainState(G, initial_config(G, init), q, p, seed, restriction)
    d = G.d if d is None else d
    windows = phase_windows(int(q), d, G.n) if (q >= 3 and d >= 3 and float(q).is_integer()) else None
    trace = Trace(windows=windows)
    if observe:
        trace.observe(0, state.config, windows)
    obs_marks = set(range(stride, T + 1, stride)) if observe else set()
    marks = sorted(obs_marks | ({burn_in} if track_marginals else set()) | {T})
    if track_marginals and burn_in == 0:
        state.start_marginals()
    for mk in marks:
        if mk <= state.step_count:
            continue
        state.run(mk - state.step_count)
        if track_marginals and mk == burn_in:
            state.start_marginals()
        if observe and (mk % stride == 0 or mk == T) and mk > 0:
            trace.observe(mk, state.config, windows)
    if track_marginals:
        trace.marginals = state.marginals()
    return trace, state


def empirical_law(G: Multigraph, q: float, p: float, T: int, seed, burn_in: int | None = None,
                  init="all-out") -> np.ndarray:
    """Histogram (normalised) over bitmask states of the unrestricted chain."""
    if G.m > 24:
        raise ValueError("bitmask histogram only for graphs with at most 24 edges")
    burn_in = T // 10 if burn_in is None else burn_in
    state = ChainState(G, initial_config(G, init), q, p, seed)
    hist = np.zeros(1 << G.m, dtype=np.int64)
    state.run(T, hist=hist, hist_from=burn_in)
    return hist / hist.sum()


# -- grand coupling -----------------------------------------------------------

class CoupledChains:
    """Several chains on one graph driven by shared (edge, uniform) draws."""

    def __init__(self, states: list[EdgeConfig], q: float, p: float, seed, restriction=None):
        if not states:
            raise ValueError("need at least one state")
        G = states[0].G
        if any(s.G is not G for s in states):
            raise ValueError("all coupled states must share one graph")
        self.G = G
        self.q, self.p, self.p_hat = q, p, _p_hat(p, q)
        self.rng = as_rng(seed)
        self.members = np.stack([s.member for s in states]).astype(np.bool_)
        self.sizes = self.members.sum(axis=1).astype(np.int64)
        if isinstance(restriction, PhaseRestriction):
            self.lo, self.hi = restriction.lo, restriction.hi
        else:
            self.lo, self.hi = 0, G.m
        self.pool = np.arange(G.m, dtype=np.int64)
        self.pairs = np.array([(a, b) for a in range(len(states)) for b in range(len(states))
                               if a != b and states[a].issubset(states[b])], dtype=np.int64).reshape(-1, 2)
        self.violations = 0
        self.step_count = 0
        self._stamp = 0
        self._mark = np.full(G.n, -1, dtype=np.int64)
        self._qa = np.empty(G.n, dtype=np.int64)
        self._qb = np.empty(G.n, dtype=np.int64)

    def configs(self) -> list[EdgeConfig]:
        return [EdgeConfig(self.G, row) for row in self.members]

    def diff(self) -> int:
        if len(self.members) < 2:
            return 0
        return int(np.count_nonzero(self.members[0] != self.members[1]))

    def advance(self, choices, us, stop_when_equal: bool = False) -> int:
        a = graph_arrays(self.G)
        work = np.array([0, self._stamp, self.diff(), 0], dtype=np.int64)
        _kernels.run_coupled(a["offsets"], a["he_edge"], a["he_nbr"], a["edge_u"], a["edge_v"],
                             self.members, self.sizes, self.pool, np.asarray(choices, dtype=np.int64),
                             np.asarray(us, dtype=np.float64), float(self.p), float(self.p_hat),
                             int(self.lo), int(self.hi), work, self._mark, self._qa, self._qb,
                             self.pairs, stop_when_equal)
        self._stamp = int(work[1])
        self.violations += int(work[3])
        self.step_count += int(work[0])
        return int(work[0])

    def run(self, T: int, stop_when_equal: bool = False, chunk: int = CHUNK) -> int:
        """Advance up to T steps; returns the steps taken."""
        taken = 0
        while taken < T:
            k = min(T - taken, chunk)
            c = self.rng.integers(0, len(self.pool), size=k)
            u = self.rng.random(k)
            done = self.advance(c, u, stop_when_equal)
            taken += done
            if stop_when_equal and self.diff() == 0:
                break
        return taken


def grand_coupling_step(chains: list[ChainState], choice: tuple[int, float] | None = None) -> list[StepReport]:
    """Reference coupled step: one shared edge index and uniform for all chains."""
    G = chains[0].G
    if any(c.G is not G for c in chains):
        raise ValueError("coupled chains must share one graph")
    if choice is None:
        rng = chains[0].rng
        choice = (int(rng.integers(0, len(chains[0].pool))), float(rng.random()))
    return [rc_step(c, choice) for c in chains]


# -- ball-restricted marginals ------------------------------------------------

def _reduced_ball_graph(G: Multigraph, B: Ball, boundary: str) -> tuple[Multigraph, np.ndarray, int]:
    """Graph equivalent to G with outside edges frozen, restricted to what matters.

    Ball vertices are kept; with a wired boundary each outside component
    touching the ball becomes one extra vertex, glued (by a frozen edge) to
    every ball vertex it contains.  Returns the graph, the ball edge ids in
    the reduced graph order, and the number of ball edges (the first edges).
    """
    verts = sorted(B.vertices)
    index = {v: i for i, v in enumerate(verts)}
    ball_edges = sorted(B.edges)
    edges = [(index[int(G.edge_u[e])], index[int(G.edge_v[e])]) for e in ball_edges]
    nv = len(verts)
    if boundary == "wired":
        outside = np.ones(G.m, dtype=np.bool_)
        outside[ball_edges] = False
        lab = graph_components(G, outside)
        super_ids: dict[int, int] = {}
        for v in verts:
            L = int(lab.labels[v])
            if lab.sizes[L] == 1:
                continue
            if L not in super_ids:
                super_ids[L] = nv + len(super_ids)
            edges.append((index[v], super_ids[L]))
        nv += len(super_ids)
    H = Multigraph.from_edges(nv, edges)
    return H, np.asarray(ball_edges, dtype=np.int64), len(ball_edges)


@dataclass(frozen=True)
class MarginalEstimate:
    mean: float
    stderr: float
    replicas: int


def ball_marginal(G: Multigraph, v: int, radius: int, boundary: str, q: float, p: float, e: int,
                  T: int, replicas: int, seed, burn_in: int | None = None) -> MarginalEstimate:
    """Monte Carlo estimate of the inclusion probability of ``e`` under the ball chain."""
    B = make_ball(G, v, radius)
    if e not in B.edges:
        raise ValueError(f"edge {e} is not inside the ball of radius {radius} at {v}")
    if boundary not in ("free", "wired"):
        raise ValueError("boundary must be 'free' or 'wired'")
    H, ball_edges, k = _reduced_ball_graph(G, B, boundary)
    local_e = int(np.searchsorted(ball_edges, e))
    burn_in = T // 2 if burn_in is None else burn_in
    rng = as_rng(seed)
    ests = np.empty(replicas)
    for r in range(replicas):
        member = np.zeros(H.m, dtype=np.bool_)
        member[k:] = True  # glue edges (wired boundary only)
        if boundary == "wired":
            member[:k] = True
        st = ChainState(H, EdgeConfig(H, member), q, p, rng.integers(0, 2**63 - 1))
        st.pool = np.arange(k, dtype=np.int64)
        st.run(burn_in)
        st.start_marginals()
        st.run(T - burn_in)
        ests[r] = st.marginals()[local_e]
    se = float(ests.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else float("nan")
    return MarginalEstimate(float(ests.mean()), se, replicas)
