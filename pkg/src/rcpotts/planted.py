"""Planted (graph, colouring) pairs at fixed statistics and the lazy exploration process.

A planted pair is uniform given its colour counts ``n_i`` and half-edge
bucket counts ``b_ij`` (half-edges of colour i that go to colour j).  The
eager sampler draws the whole graph; ``LazyPlanted`` reveals the same law
one half-edge at a time, which is what the shattering exploration needs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import phasecalc as pc
from .gibbs import SpinConfig
from .graphgen import Multigraph, UnionFind
from .rng import as_rng


# -- statistics and rounding ----------------------------------------------------

@dataclass(frozen=True)
class PlantedSpec:
    q: int
    d: int
    n: int
    phase: str
    beta: float
    nu: np.ndarray
    rho: np.ndarray
    counts: np.ndarray    # n_i
    buckets: np.ndarray   # b_ij

    def to_json(self) -> str:
        return json.dumps({
            "q": self.q, "d": self.d, "n": self.n, "phase": self.phase, "beta": self.beta,
            "counts": self.counts.tolist(), "buckets": self.buckets.tolist(),
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "PlantedSpec":
        obj = json.loads(text)
        nu, rho = _targets(obj["q"], obj["d"], obj["phase"], obj["beta"])
        return cls(obj["q"], obj["d"], obj["n"], obj["phase"], obj["beta"], nu, rho,
                   np.array(obj["counts"], dtype=np.int64), np.array(obj["buckets"], dtype=np.int64))


def _targets(q: int, d: int, phase: str, beta: float) -> tuple[np.ndarray, np.ndarray]:
    if phase == "disordered":
        return pc.nu_dis(q), pc.rho_dis(q, beta)
    if phase == "ordered":
        t = pc.solve_t(q, d, beta)
        nu = pc.nu_ord_from_t(q, d, t)
        return nu, pc.rho_ord(q, d, beta, nu)
    raise ValueError(f"unknown phase {phase!r}")


def largest_remainder(total: int, weights: np.ndarray) -> np.ndarray:
    """Integers summing to ``total`` closest to ``total * weights`` (ties to lower index)."""
    raw = total * np.asarray(weights, dtype=float) / np.sum(weights)
    base = np.floor(raw).astype(np.int64)
    short = total - int(base.sum())
    order = np.lexsort((np.arange(len(raw)), -(raw - base)))
    base[order[:short]] += 1
    return base


def round_buckets(counts: np.ndarray, rho: np.ndarray, d: int) -> np.ndarray:
    """Symmetric integer bucket table with even diagonal and row sums d*n_i.

    Off-diagonal entries are rounded from d*n*rho, the diagonal is whatever the
    row marginal leaves.  Odd diagonals are then repaired in pairs by moving
    one half-edge pair onto the joining off-diagonal entry, and negative
    diagonals by moving two units off the largest off-diagonal entry of the row.
    """
    q = len(counts)
    dn = d * int(counts.sum())
    b = np.rint(dn * rho).astype(np.int64)
    b = np.triu(b, 1)
    b = b + b.T
    rows = d * counts
    for i in range(q):
        b[i, i] = rows[i] - (b[i].sum() - b[i, i])
    for _ in range(4 * q * q + 10):
        neg = [i for i in range(q) if b[i, i] < 0]
        if neg:
            i = neg[0]
            off = [(b[i, j], -j) for j in range(q) if j != i and b[i, j] >= 2]
            if not off:
                raise ValueError("bucket rounding infeasible: row cannot be repaired")
            j = -max(off)[1]
            b[i, j] -= 2
            b[j, i] -= 2
            b[i, i] += 2
            b[j, j] += 2
            continue
        odd = [i for i in range(q) if b[i, i] % 2]
        if odd:
            i, k = odd[0], odd[1]
            b[i, k] += 1
            b[k, i] += 1
            b[i, i] -= 1
            b[k, k] -= 1
            continue
        break
    if np.any(np.diag(b) % 2) or np.any(b < 0) or not np.array_equal(b, b.T) \
            or not np.array_equal(b.sum(axis=1), rows):
        raise ValueError("bucket rounding failed to meet the constraints")
    return b


def make_planted_spec(q: int, d: int, n: int, phase: str, beta: float) -> PlantedSpec:
    if (n * d) % 2:
        raise ValueError("n*d must be even")
    if phase == "disordered" and beta >= pc.beta_u_prime_alt(q, d):
        raise ValueError("disordered planting needs beta below the upper threshold")
    if phase == "ordered" and beta <= pc.beta_u(q, d):
        raise ValueError("ordered planting needs beta above beta_u")
    nu, rho = _targets(q, d, phase, beta)
    counts = largest_remainder(n, nu)
    b = round_buckets(counts, rho, d)
    return PlantedSpec(q, d, n, phase, beta, nu, rho, counts, b)


# -- eager sampler --------------------------------------------------------------

def sample_planted(spec: PlantedSpec, seed) -> tuple[Multigraph, SpinConfig]:
    """Uniform pair (G, sigma) with the spec's colour counts and bucket counts."""
    rng = as_rng(seed)
    q, d, n = spec.q, spec.d, spec.n
    colours = np.repeat(np.arange(1, q + 1), spec.counts)
    rng.shuffle(colours)
    he_colour = np.repeat(colours, d)
    bucket = [[None] * q for _ in range(q)]
    for i in range(q):
        hs = np.flatnonzero(he_colour == i + 1)
        hs = hs[rng.permutation(len(hs))]
        cuts = np.cumsum(spec.buckets[i])[:-1]
        for j, part in enumerate(np.split(hs, cuts)):
            bucket[i][j] = part
    pairing = np.empty(n * d, dtype=np.int64)
    for i in range(q):
        a = bucket[i][i]
        pairing[a[0::2]] = a[1::2]
        pairing[a[1::2]] = a[0::2]
        for j in range(i + 1, q):
            a, b = bucket[i][j], bucket[j][i]
            pairing[a] = b
            pairing[b] = a
    G = Multigraph.from_pairing(np.full(n, d), pairing, d=d)
    return G, SpinConfig(G, colours, q)


def class_percolation(G: Multigraph, colours: np.ndarray, p: float, q: int, seed) -> list[tuple[int, int]]:
    """Percolate each colour class's internal edges; (class size, largest component) per class."""
    rng = as_rng(seed)
    colours = np.asarray(colours)
    keep = (colours[G.edge_u] == colours[G.edge_v]) & (rng.random(G.m) < p)
    uf = UnionFind(G.n)
    for e in np.flatnonzero(keep).tolist():
        uf.union(int(G.edge_u[e]), int(G.edge_v[e]))
    out = []
    for i in range(1, q + 1):
        members = np.flatnonzero(colours == i)
        if len(members) == 0:
            out.append((0, 0))
            continue
        roots = np.fromiter((uf.find(int(x)) for x in members), dtype=np.int64, count=len(members))
        _, cnt = np.unique(roots, return_counts=True)
        out.append((len(members), int(cnt.max())))
    return out


# -- lazy exploration -----------------------------------------------------------

@dataclass
class ExplorationRecord:
    t: int
    w: int
    slot: int
    z: int
    same_colour: bool
    survived: bool
    ind: bool        # z was active at some earlier time
    ind_prime: bool  # monochromatic and kept by the percolation coin
    active: int


@dataclass
class ExplorationTrace:
    records: list = field(default_factory=list)
    sphere_size: int = 0
    K_observed: int = 0
    activations: int = 0
    steps_used: int = 0
    T_cap: int = 0
    K_cap: int = 0
    active_at_cap: int = 0
    final_active: int = 0
    K_exact: int = 0
    shattered: bool = False

    def to_csv(self, header: str = "") -> str:
        buf = io.StringIO()
        buf.write(header)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "w", "slot", "z", "same_colour", "survived", "ind", "ind_prime", "active"])
        for r in self.records:
            w.writerow([r.t, r.w, r.slot, r.z, int(r.same_colour), int(r.survived), int(r.ind),
                        int(r.ind_prime), r.active])
        return buf.getvalue()


class LazyPlanted:
    """Half-edge-at-a-time reveal of a planted pair with fixed statistics.

    Half-edge ``h`` belongs to vertex ``h // d``.  ``M[i, j]`` counts the
    unmatched half-edges of colour i still owed to colour j.  ``match``
    draws the partner colour proportionally to ``M[i, :]`` and then a
    uniform unmatched half-edge of that colour; this reveals the same law as
    the eager bucket sampler.
    """

    def __init__(self, spec: PlantedSpec, seed, colours: np.ndarray | None = None):
        self.spec = spec
        self.rng = as_rng(seed)
        q, d, n = spec.q, spec.d, spec.n
        if colours is None:
            colours = np.repeat(np.arange(1, q + 1), spec.counts)
            self.rng.shuffle(colours)
        self.colours = np.asarray(colours, dtype=np.int64)
        self.d = d
        self._col = [int(c) - 1 for c in self.colours]
        self._M = spec.buckets.astype(np.int64).tolist()
        self._free = [d] * n
        self.partner = np.full(n * d, -1, dtype=np.int64)
        he_col = np.repeat(self.colours, d) - 1
        self.pool = [np.flatnonzero(he_col == i) for i in range(q)]
        self.pool_len = [len(pl) for pl in self.pool]
        self.pos = np.empty(n * d, dtype=np.int64)
        for pl in self.pool:
            self.pos[pl] = np.arange(len(pl))
        self.matches = 0
        self._scan = 0  # lowest possibly-unmatched half-edge

    @property
    def M(self) -> np.ndarray:
        """Unmatched half-edges of colour i still owed to colour j."""
        return np.array(self._M, dtype=np.int64)

    def _take(self, h: int) -> None:
        i = self._col[h // self.d]
        self._free[h // self.d] -= 1
        pl = self.pool[i]
        k = self.pos[h]
        last = self.pool_len[i] - 1
        g = pl[last]
        pl[k], pl[last] = g, h
        self.pos[g], self.pos[h] = k, last
        self.pool_len[i] = last

    def is_matched(self, h: int) -> bool:
        return self.partner[h] >= 0

    def unmatched_slots(self, v: int) -> list[int]:
        base = v * self.d
        return [base + r for r in range(self.d) if self.partner[base + r] < 0]

    def has_unmatched(self, v: int) -> bool:
        return self._free[v] > 0

    def match(self, h: int) -> int:
        """Match half-edge ``h``; returns the partner half-edge."""
        if self.partner[h] >= 0:
            raise ValueError(f"half-edge {h} already matched")
        i = self._col[h // self.d]
        M = self._M
        row = M[i]
        tot = sum(row)
        if tot <= 0:
            raise RuntimeError("bucket exhaustion: no unmatched half-edges owed by this colour")
        x = int(self.rng.integers(0, tot))
        j = 0
        while x >= row[j]:
            x -= row[j]
            j += 1
        self._take(h)
        avail = self.pool_len[j]
        if avail <= 0 or M[j][i] <= 0 or (i == j and M[i][i] < 2):
            raise RuntimeError("bucket counts inconsistent with unmatched pools")
        g = int(self.pool[j][self.rng.integers(0, avail)])
        self._take(g)
        self.partner[h], self.partner[g] = g, h
        M[i][j] -= 1
        M[j][i] -= 1
        self.matches += 1
        return g

    def lowest_unmatched(self) -> int | None:
        H = len(self.partner)
        while self._scan < H and self.partner[self._scan] >= 0:
            self._scan += 1
        return self._scan if self._scan < H else None

    def reveal_ball(self, v: int, radius: int) -> tuple[dict, list[int], list[tuple[int, int]]]:
        """Reveal every edge at a vertex of distance < radius from v.

        Returns (distances, sphere in discovery order, revealed ball edges as vertex pairs).
        """
        dist = {v: 0}
        order = [v]
        edges = []
        k = 0
        while k < len(order):
            x = order[k]
            k += 1
            if dist[x] >= radius:
                continue
            for h in range(x * self.d, (x + 1) * self.d):
                if self.partner[h] >= 0:
                    continue
                g = self.match(h)
                z = g // self.d
                edges.append((x, z))
                if z not in dist:
                    dist[z] = dist[x] + 1
                    order.append(z)
        sphere = [x for x in order if dist[x] == radius]
        return dist, sphere, edges

    def explore(self, sphere: list[int], p: float, T_cap: int, K_cap: int,
                ball_vertices=None, record: bool = True, max_steps: int | None = None) -> ExplorationTrace:
        """The exploration loop, run while the active set is non-empty or t <= T_cap.

        The slot list of the vertex being processed is frozen at selection
        time; each slot is still checked for being unmatched when reached.
        Besides the indicator counts, a union-find over kept non-ball edges
        gives the exact number of merged sphere vertices once the active set
        has emptied.
        """
        d = self.d
        ball_vertices = set(sphere) if ball_vertices is None else set(ball_vertices)
        sphere_set = set(sphere)
        active: dict[int, None] = {w: None for w in sphere if self.has_unmatched(w)}
        ever = set(sphere)
        uf: dict[int, int] = {}

        def find(x):
            root = x
            while uf.get(root, root) != root:
                root = uf[root]
            while uf.get(x, x) != root:
                nxt = uf[x]
                uf[x] = root
                x = nxt
            return root

        tr = ExplorationTrace(sphere_size=len(sphere), T_cap=T_cap, K_cap=K_cap)
        t = 0
        max_steps = len(self.partner) if max_steps is None else max_steps
        K_exact = None
        while active or t <= T_cap:
            if t >= max_steps:
                break
            if not active:
                if K_exact is None:
                    K_exact = self._k_exact(sphere, find)
                h = self.lowest_unmatched()
                if h is None:
                    break
                g = self.match(h)
                t += 1
                z = g // d
                ind = z in ever
                tr.K_observed += ind
                if record:
                    tr.records.append(ExplorationRecord(t, h // d, h % d, z, False, False, ind, False, 0))
                if t == T_cap:
                    tr.active_at_cap = 0
                continue
            w = next(iter(active))
            cw = self._col[w]
            for h in range(w * d, (w + 1) * d):
                if self.partner[h] >= 0:
                    continue
                t += 1
                g = self.match(h)
                z = g // d
                same = self._col[z] == cw
                survived = same and bool(self.rng.random() < p)
                ind = z in ever
                in_ball_edge = w in sphere_set and z in ball_vertices
                if survived:
                    if z not in ever:
                        ever.add(z)
                    if self.has_unmatched(z):
                        active[z] = None
                    tr.activations += 1
                    if not in_ball_edge:
                        ra, rb = find(w), find(z)
                        if ra != rb:
                            uf[ra] = rb
                tr.K_observed += ind
                if record:
                    tr.records.append(ExplorationRecord(t, w, h - w * d, z, same, survived, ind, survived,
                                                        len(active)))
                if t == T_cap:
                    tr.active_at_cap = len(active)
            for x in [x for x in active if not self.has_unmatched(x)]:
                del active[x]
        if K_exact is None:
            K_exact = self._k_exact(sphere, find)
        tr.steps_used = t
        tr.final_active = len(active)
        tr.K_exact = K_exact
        tr.shattered = tr.K_observed <= K_cap and tr.final_active == 0
        return tr

    @staticmethod
    def _k_exact(sphere, find) -> int:
        return len(sphere) - len({find(x) for x in sphere})


def default_caps(n: int, eps: float = 0.1) -> tuple[int, int]:
    """(T_cap, K_cap) = (floor(n^(1/2 - eps)), ceil(10/eps))."""
    return int(math.floor(n ** (0.5 - eps))), int(math.ceil(10 / eps))


def explore_shattering(spec: PlantedSpec, v: int, radius: int, p: float, seed,
                       T_cap: int | None = None, K_cap: int | None = None, eps: float = 0.1,
                       record: bool = True) -> ExplorationTrace:
    """Reveal the ball of ``radius`` around ``v`` lazily, then explore from its sphere."""
    Tc, Kc = default_caps(spec.n, eps)
    T_cap = Tc if T_cap is None else T_cap
    K_cap = Kc if K_cap is None else K_cap
    lz = LazyPlanted(spec, seed)
    dist, sphere, _ = lz.reveal_ball(v, radius)
    return lz.explore(sphere, p, T_cap, K_cap, ball_vertices=set(dist), record=record)
