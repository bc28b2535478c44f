"""Potts configurations, colour statistics, phase labels and the percolation step."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .graphgen import Multigraph
from .phasecalc import DEFAULT_THETA, PhaseProfile
from .rcdyn import EdgeConfig
from .rng import as_rng


class SpinConfig:
    """A q-colouring with cached colour counts and monochromatic-edge count.

    Colours are 1..q.  Self-loops are always monochromatic and parallel edges
    count separately.
    """

    def __init__(self, G: Multigraph, colours, q: int):
        colours = np.asarray(colours, dtype=np.int64).copy()
        if colours.shape != (G.n,):
            raise ValueError("need one colour per vertex")
        if np.any(colours < 1) or np.any(colours > q):
            raise ValueError(f"colours must lie in 1..{q}")
        self.G = G
        self.q = q
        self.colours = colours
        self.counts = np.bincount(colours - 1, minlength=q).astype(np.int64)
        self.mono = count_mono(G, colours)

    def recolour(self, v: int, c: int) -> None:
        if not 1 <= c <= self.q:
            raise ValueError(f"colour {c} outside 1..{self.q}")
        old = int(self.colours[v])
        if old == c:
            return
        delta = 0
        for y, _ in self.G.adjacency[v]:
            if y == v:
                continue  # self-loop stays monochromatic
            cy = int(self.colours[y])
            delta += (cy == c) - (cy == old)
        self.colours[v] = c
        self.counts[old - 1] -= 1
        self.counts[c - 1] += 1
        self.mono += delta

    def copy(self) -> "SpinConfig":
        return SpinConfig(self.G, self.colours, self.q)


def count_mono(G: Multigraph, colours) -> int:
    colours = np.asarray(colours)
    return int(np.count_nonzero(colours[G.edge_u] == colours[G.edge_v]))


def potts_weight_log(G: Multigraph, sigma, beta: float, q: int | None = None) -> float:
    """beta * m(sigma), the unnormalised log-weight."""
    colours = sigma.colours if isinstance(sigma, SpinConfig) else np.asarray(sigma)
    if q is None and isinstance(sigma, SpinConfig):
        q = sigma.q
    if np.any(colours < 1) or (q is not None and np.any(colours > q)):
        raise ValueError("colour out of range")
    return beta * count_mono(G, colours)


@dataclass(frozen=True)
class ColourStats:
    counts: np.ndarray        # vertices per colour
    pair_counts: np.ndarray   # half-edge pairs from colour i to colour j
    nu: np.ndarray
    rho: np.ndarray


def colour_stats(G: Multigraph, sigma, q: int | None = None) -> ColourStats:
    colours = sigma.colours if isinstance(sigma, SpinConfig) else np.asarray(sigma)
    q = sigma.q if isinstance(sigma, SpinConfig) else (int(colours.max()) if q is None else q)
    counts = np.bincount(colours - 1, minlength=q).astype(np.int64)
    cu = colours[G.edge_u] - 1
    cv = colours[G.edge_v] - 1
    pc = np.zeros((q, q), dtype=np.int64)
    np.add.at(pc, (cu, cv), 1)
    np.add.at(pc, (cv, cu), 1)
    two_m = 2 * G.m
    rho = pc / two_m if two_m else pc.astype(float)
    return ColourStats(counts, pc, counts / G.n, rho)


@dataclass(frozen=True)
class PhaseLabel:
    kind: str                 # "disordered", "ordered" or "neither"
    colour: int | None = None


def theta_limit(profile: PhaseProfile) -> float:
    """Half the smallest l1 distance between the disordered and ordered phase vectors."""
    q = profile.q
    if not profile.has_ordered:
        return np.inf
    a = profile.a
    b = (1 - a) / (q - 1)
    dis_ord = abs(a - 1 / q) + (q - 1) * abs(b - 1 / q)
    ord_ord = 2 * abs(a - b)
    return 0.5 * min(dis_ord, ord_ord)


def phase_membership(stats: ColourStats, profile: PhaseProfile, theta: float = DEFAULT_THETA) -> PhaseLabel:
    if theta <= 0:
        raise ValueError("theta must be positive")
    if theta >= theta_limit(profile):
        raise ValueError(f"theta={theta} makes the phase windows overlap (limit {theta_limit(profile):.6g})")
    nu = stats.nu
    if np.abs(nu - profile.nu_dis).sum() <= theta:
        return PhaseLabel("disordered")
    if profile.has_ordered:
        q = profile.q
        a = profile.a
        b = (1 - a) / (q - 1)
        for i in range(q):
            target = np.full(q, b)
            target[i] = a
            if np.abs(nu - target).sum() <= theta:
                return PhaseLabel("ordered", i + 1)
    return PhaseLabel("neither")


def percolate(G: Multigraph, sigma, p: float, seed) -> EdgeConfig:
    """Keep each monochromatic edge independently with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    colours = sigma.colours if isinstance(sigma, SpinConfig) else np.asarray(sigma)
    rng = as_rng(seed)
    mono = colours[G.edge_u] == colours[G.edge_v]
    keep = rng.random(G.m) < p
    return EdgeConfig(G, mono & keep)


def percolate_masks(G: Multigraph, spins: np.ndarray, p: float, seed) -> np.ndarray:
    """Bitmask form of ``percolate`` applied to each row of ``spins``.

    Uniforms are drawn row by row, so the result equals repeated ``percolate``
    calls on one generator.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    spins = np.atleast_2d(np.asarray(spins))
    rng = as_rng(seed)
    keep = (spins[:, G.edge_u] == spins[:, G.edge_v]) & (rng.random((len(spins), G.m)) < p)
    return (keep.astype(np.int64) << np.arange(G.m)).sum(axis=1)


def colour_components(G: Multigraph, F: EdgeConfig, q: int, seed) -> np.ndarray:
    """Potts colouring from an RC configuration: one uniform colour per component."""
    rng = as_rng(seed)
    lab = F.components()
    roots = np.unique(lab.labels)
    colour_of = dict(zip(roots.tolist(), (rng.integers(1, q + 1, size=len(roots))).tolist()))
    return np.array([colour_of[x] for x in lab.labels.tolist()], dtype=np.int64)


def potts_via_rc(G: Multigraph, init, q: int, p: float, T: int, seed, d: int | None = None,
                 stride: int | None = None, observe: bool = True):
    """Run the RC chain for T steps, then colour each cluster uniformly.

    Returns (colours, trace, final chain state).
    """
    from .rcdyn import run_chain
    rng = as_rng(seed)
    trace, state = run_chain(G, init, q, p, T, rng, d=d, stride=stride, observe=observe)
    return colour_components(G, state.config, q, rng), trace, state


def sample_exact_potts(G: Multigraph, q: int, beta: float, size: int, seed) -> np.ndarray:
    """``size`` independent draws (as spin rows) from the exact Potts law on a tiny graph."""
    from .oracle import exact_potts
    ex = exact_potts(G, q, beta)
    rng = as_rng(seed)
    idx = rng.choice(len(ex.support), size=size, p=ex.probs)
    return ex.support[idx]


# -- spin files ---------------------------------------------------------------

def spins_to_text(sigma: SpinConfig) -> str:
    return f"{len(sigma.colours)} {sigma.q}\n" + "\n".join(str(int(c)) for c in sigma.colours) + "\n"


def spins_from_text(text: str, G: Multigraph) -> SpinConfig:
    toks = " ".join(ln for ln in text.splitlines() if not ln.startswith("#")).split()
    n, q = int(toks[0]), int(toks[1])
    if n != G.n:
        raise ValueError(f"spin file has n={n}, graph has n={G.n}")
    vals = [int(x) for x in toks[2:]]
    if len(vals) != n:
        raise ValueError(f"expected {n} colours, found {len(vals)}")
    return SpinConfig(G, vals, q)


def all_colourings(n: int, q: int):
    return itertools.product(range(1, q + 1), repeat=n)
