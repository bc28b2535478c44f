"""Exact enumeration of Potts and random-cluster laws on tiny graphs.

Everything is computed in log space.  Edge subsets are indexed by bitmask
(bit ``e`` set iff edge ``e`` is in F); spin configurations by their base-q
expansion with vertex 0 as the most significant digit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import mpmath
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.special import logsumexp

from . import _kernels
from .graphgen import Multigraph
from .phasecalc import p_hat as _p_hat

POTTS_LIMIT = 10**7
RC_LIMIT = 10**7
TRANSITION_LIMIT = 1 << 14


class InstanceTooLarge(ValueError):
    pass


# -- fixtures -----------------------------------------------------------------

def _fixture_edges() -> dict[str, tuple[int, list[tuple[int, int]]]]:
    cycle5 = [(i, (i + 1) % 5) for i in range(5)]
    return {
        "single_edge": (2, [(0, 1)]),
        "self_loop": (1, [(0, 0)]),
        "parallel_edges": (2, [(0, 1), (0, 1)]),
        "path3": (4, [(0, 1), (1, 2), (2, 3)]),
        "triangle": (3, [(0, 1), (1, 2), (2, 0)]),
        "k4": (4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]),
        "cycle6": (6, [(i, (i + 1) % 6) for i in range(6)]),
        # outer 5-cycle of the Petersen graph plus three spokes
        "petersen8": (8, cycle5 + [(0, 5), (1, 6), (2, 7)]),
    }


FIXTURE_NAMES = tuple(_fixture_edges())


def fixture(name: str) -> Multigraph:
    n, edges = _fixture_edges()[name]
    return Multigraph.from_edges(n, edges)


def fixtures() -> dict[str, Multigraph]:
    return {name: fixture(name) for name in FIXTURE_NAMES}


# -- exact distributions ------------------------------------------------------

@dataclass(frozen=True)
class ExactDistribution:
    kind: str               # "potts" or "rc"
    support: np.ndarray     # spin rows (potts) or bitmasks (rc)
    logw: np.ndarray        # unnormalised log-weights
    logZ: float
    marginals: np.ndarray   # per-edge inclusion (rc) or per-vertex colour marginals (potts)

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.logw - self.logZ)


def _all_spins(n: int, q: int) -> np.ndarray:
    """Rows of all q^n colourings in [1..q], lexicographic with vertex 0 most significant."""
    grids = np.indices((q,) * n).reshape(n, -1).T if n else np.zeros((1, 0), dtype=np.int64)
    return grids.astype(np.int64) + 1


def mono_counts(G: Multigraph, spins: np.ndarray) -> np.ndarray:
    """Monochromatic edge counts for each row of ``spins`` (self-loops always count)."""
    if G.m == 0:
        return np.zeros(len(spins), dtype=np.int64)
    return (spins[:, G.edge_u] == spins[:, G.edge_v]).sum(axis=1)


def exact_potts(G: Multigraph, q: int, beta: float) -> ExactDistribution:
    if q ** G.n > POTTS_LIMIT:
        raise InstanceTooLarge(f"q^n = {q}^{G.n} exceeds {POTTS_LIMIT}")
    spins = _all_spins(G.n, q)
    logw = beta * mono_counts(G, spins).astype(float)
    logZ = float(logsumexp(logw))
    probs = np.exp(logw - logZ)
    marg = np.zeros((G.n, q))
    for i in range(q):
        marg[:, i] = probs @ (spins == i + 1)
    return ExactDistribution("potts", spins, logw, logZ, marg)


def all_masks(m: int) -> np.ndarray:
    return np.arange(1 << m, dtype=np.int64)


def mask_bits(masks: np.ndarray, m: int) -> np.ndarray:
    """Boolean array (len(masks), m) with entry e set iff bit e is set."""
    return ((masks[:, None] >> np.arange(m)) & 1).astype(bool)


def component_counts(G: Multigraph, masks: np.ndarray) -> np.ndarray:
    return _kernels.count_components_masks(G.n, G.edge_u.astype(np.int64), G.edge_v.astype(np.int64),
                                           np.asarray(masks, dtype=np.int64))


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def rc_logweights(G: Multigraph, q: float, p: float, masks: np.ndarray | None = None) -> np.ndarray:
    masks = all_masks(G.m) if masks is None else masks
    c = component_counts(G, masks)
    k = mask_bits(masks, G.m).sum(axis=1)
    lp, lq = _log(p), _log(1 - p)
    with np.errstate(invalid="ignore"):
        a = np.where(k > 0, k * lp, 0.0)
        b = np.where(G.m - k > 0, (G.m - k) * lq, 0.0)
    return c * math.log(q) + a + b


def exact_rc(G: Multigraph, q: float, p: float) -> ExactDistribution:
    if (1 << G.m) > RC_LIMIT:
        raise InstanceTooLarge(f"2^|E| = 2^{G.m} exceeds {RC_LIMIT}")
    masks = all_masks(G.m)
    logw = rc_logweights(G, q, p, masks)
    logZ = float(logsumexp(logw))
    probs = np.exp(logw - logZ)
    marg = probs @ mask_bits(masks, G.m) if G.m else np.zeros(0)
    return ExactDistribution("rc", masks, logw, logZ, marg)


def exact_tv(d1, d2) -> float:
    """Total variation distance between two distributions on a common indexing."""
    a = d1.probs if isinstance(d1, ExactDistribution) else np.asarray(d1, dtype=float)
    b = d2.probs if isinstance(d2, ExactDistribution) else np.asarray(d2, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"support mismatch: {a.shape} vs {b.shape}")
    return 0.5 * float(np.abs(a - b).sum())


# -- Edwards-Sokal --------------------------------------------------------------

def mono_masks(G: Multigraph, spins: np.ndarray) -> np.ndarray:
    eq = spins[:, G.edge_u] == spins[:, G.edge_v]
    return (eq.astype(np.int64) << np.arange(G.m)).sum(axis=1)


def edwards_sokal_pushforward(G: Multigraph, q: int, p: float) -> np.ndarray:
    """Exact law of percolate(G, sigma, p) with sigma ~ Potts(beta = -ln(1-p)).

    Configurations are grouped by their monochromatic-edge mask M; each group
    then contributes p^|F| (1-p)^{|M|-|F|} to every F inside M.
    """
    beta = -math.log1p(-p) if p < 1 else math.inf
    if not math.isfinite(beta):
        raise ValueError("p must be < 1")
    pot = exact_potts(G, q, beta)
    mm = mono_masks(G, pot.support)
    probs = pot.probs
    uniq, inv = np.unique(mm, return_inverse=True)
    group = np.bincount(inv, weights=probs)
    masks = all_masks(G.m)
    bits = mask_bits(masks, G.m)
    kF = bits.sum(axis=1)
    out = np.zeros(len(masks))
    for M, w in zip(uniq.tolist(), group.tolist()):
        inside = (masks & ~M) == 0
        kM = bin(M).count("1")
        out[inside] += w * p ** kF[inside] * (1 - p) ** (kM - kF[inside])
    return out


# -- transition matrix ----------------------------------------------------------

@dataclass(frozen=True)
class TransitionReport:
    stationarity_residual: float
    reversibility_residual: float
    irreducible: bool
    row_sum_residual: float

    def ok(self, tol: float = 1e-10) -> bool:
        return self.stationarity_residual < tol and self.irreducible and self.row_sum_residual < tol


def transition_matrix(G: Multigraph, q: float, p: float) -> np.ndarray:
    """Dense single-step transition matrix of the RC chain on bitmask states."""
    m = G.m
    S = 1 << m
    if S > TRANSITION_LIMIT:
        raise InstanceTooLarge(f"2^|E| = {S} exceeds {TRANSITION_LIMIT}")
    ph = _p_hat(p, q)
    P = np.zeros((S, S))
    eu, ev = G.edge_u.tolist(), G.edge_v.tolist()
    for s in range(S):
        for e in range(m):
            rest = s & ~(1 << e)
            cut = _is_cut(G.n, eu, ev, rest, eu[e], ev[e])
            pin = ph if cut else p
            P[s, rest | (1 << e)] += pin / m
            P[s, rest] += (1 - pin) / m
    return P


def _is_cut(n, eu, ev, mask, u, v) -> bool:
    if u == v:
        return False
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x
    for e in range(len(eu)):
        if (mask >> e) & 1:
            a, b = find(eu[e]), find(ev[e])
            if a != b:
                parent[a] = b
    return find(u) != find(v)


def exact_transition_check(G: Multigraph, q: float, p: float) -> TransitionReport:
    P = transition_matrix(G, q, p)
    pi = exact_rc(G, q, p).probs
    stat = float(np.abs(pi @ P - pi).max())
    flow = pi[:, None] * P
    rev = float(np.abs(flow - flow.T).max())
    ncomp, _ = connected_components(csr_matrix(P > 0), directed=True, connection="strong")
    rows = float(np.abs(P.sum(axis=1) - 1).max())
    return TransitionReport(stat, rev, ncomp == 1, rows)


# -- golden values --------------------------------------------------------------

GOLDEN_Q = (2, 3)
GOLDEN_P = (0.3, 0.7)


def _golden_dir() -> Path:
    return Path(str(resources.files("rcpotts") / "data" / "golden"))


def golden_name(kind: str, name: str, q: int, p: float) -> str:
    return f"{name}_{kind}_q{q}_p{p:g}.csv"


def rc_logweights_mp(G: Multigraph, q: int, p: float, dps: int = 30) -> list:
    masks = all_masks(G.m)
    c = component_counts(G, masks)
    k = mask_bits(masks, G.m).sum(axis=1)
    with mpmath.workdps(dps):
        P, Q = mpmath.mpf(p), mpmath.mpf(q)
        lq, lp, l1p = mpmath.log(Q), mpmath.log(P), mpmath.log(1 - P)
        return [int(ci) * lq + int(ki) * lp + (G.m - int(ki)) * l1p for ci, ki in zip(c, k)]


def potts_logweights_mp(G: Multigraph, q: int, p: float, dps: int = 30) -> list:
    spins = _all_spins(G.n, q)
    mono = mono_counts(G, spins)
    with mpmath.workdps(dps):
        beta = -mpmath.log(1 - mpmath.mpf(p))
        return [beta * int(x) for x in mono]


def _write_rows(path: Path, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "logweight"])
        for i, x in enumerate(values):
            w.writerow([i, mpmath.nstr(x, 20)])


def write_golden(directory: Path | None = None) -> list[Path]:
    """Regenerate golden CSVs in extended precision (30 digits, stored to 20)."""
    directory = _golden_dir() if directory is None else Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for name, G in fixtures().items():
        for q in GOLDEN_Q:
            for p in GOLDEN_P:
                path = directory / golden_name("rc", name, q, p)
                _write_rows(path, rc_logweights_mp(G, q, p))
                out.append(path)
                path = directory / golden_name("potts", name, q, p)
                _write_rows(path, potts_logweights_mp(G, q, p))
                out.append(path)
    return out


def read_golden(path: Path) -> np.ndarray:
    with open(path) as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["index", "logweight"]:
        raise ValueError(f"{path.name}: bad header")
    vals = np.empty(len(rows) - 1)
    for k, (i, x) in enumerate(rows[1:]):
        if int(i) != k:
            raise ValueError(f"{path.name}: index {i} out of order")
        vals[k] = float(x)
    return vals


@dataclass(frozen=True)
class GoldenCheck:
    fixture: str
    file: str
    ok: bool
    max_abs_err: float
    detail: str = ""


def verify_golden(directory: Path | None = None, tol: float = 1e-12, names=None) -> list[GoldenCheck]:
    """Compare double-precision log-weights with the stored golden files."""
    directory = _golden_dir() if directory is None else Path(directory)
    results = []
    for name, G in fixtures().items():
        if names is not None and name not in names:
            continue
        for q in GOLDEN_Q:
            for p in GOLDEN_P:
                for kind in ("rc", "potts"):
                    fn = golden_name(kind, name, q, p)
                    path = directory / fn
                    try:
                        gold = read_golden(path)
                    except (OSError, ValueError, IndexError) as exc:
                        results.append(GoldenCheck(name, fn, False, math.inf, f"unreadable: {exc}"))
                        continue
                    if kind == "rc":
                        ours = rc_logweights(G, q, p)
                    else:
                        ours = -math.log1p(-p) * mono_counts(G, _all_spins(G.n, q)).astype(float)
                    if ours.shape != gold.shape:
                        results.append(GoldenCheck(name, fn, False, math.inf, "row count mismatch"))
                        continue
                    err = float(np.max(np.abs(ours - gold) / np.maximum(1.0, np.abs(gold)))) if len(gold) else 0.0
                    results.append(GoldenCheck(name, fn, err < tol, err))
    return results


def enumerate_pairings(items: list[int]):
    """All perfect matchings of ``items`` as lists of pairs."""
    if not items:
        yield []
        return
    a = items[0]
    for k in range(1, len(items)):
        rest = items[1:k] + items[k + 1:]
        for sub in enumerate_pairings(rest):
            yield [(a, items[k])] + sub


def count_pairings(H: int) -> int:
    return math.prod(range(H - 1, 0, -2)) if H else 1


__all__ = [
    "ExactDistribution", "FIXTURE_NAMES", "InstanceTooLarge", "TransitionReport",
    "edwards_sokal_pushforward", "enumerate_pairings", "exact_potts", "exact_rc",
    "exact_transition_check", "exact_tv", "fixture", "fixtures", "verify_golden", "write_golden",
]
