"""Configuration-model multigraphs, the exact-edge model and local structure.

Graphs are stored at the half-edge level.  Vertex ``v`` owns the half-edges
``offsets[v] .. offsets[v+1]-1``; ``pairing[h]`` is the half-edge matched to
``h`` (or -1 when ``h`` is unmatched, which only happens in the exact-edge
model).  Edge ids follow the order in which edges were created and never
change, so edge subsets elsewhere in the package are arrays indexed by id.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

from .rng import as_rng

DFS_BUDGET = 10_000_000


class BudgetExceeded(RuntimeError):
    """Raised when an exhaustive path search visits too many states."""


class UnionFind:
    """Disjoint-set union with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.count = n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        """Merge the sets of ``a`` and ``b``; False if already merged."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.count -= 1
        return True


@dataclass(frozen=True, eq=False)
class Multigraph:
    n: int
    d: int
    offsets: np.ndarray
    pairing: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    he_edge: np.ndarray

    @classmethod
    def from_pairing(cls, degrees, pairing, d: int | None = None) -> "Multigraph":
        """Build a graph from per-vertex half-edge counts and a pairing.

        Edges are numbered in increasing order of their smaller half-edge.
        """
        degrees = np.asarray(degrees, dtype=np.int64)
        pairing = np.asarray(pairing, dtype=np.int64)
        offsets = np.zeros(len(degrees) + 1, dtype=np.int64)
        np.cumsum(degrees, out=offsets[1:])
        H = int(offsets[-1])
        if pairing.shape != (H,):
            raise ValueError("pairing length must equal the number of half-edges")
        matched = pairing >= 0
        idx = np.arange(H)
        if np.any(pairing[matched] == idx[matched]):
            raise ValueError("pairing has a fixed point")
        if np.any(pairing[pairing[matched]] != idx[matched]):
            raise ValueError("pairing is not an involution")
        he_vertex = np.repeat(np.arange(len(degrees)), degrees)
        lo = idx[matched & (idx < pairing)]
        he_edge = np.full(H, -1, dtype=np.int64)
        he_edge[lo] = np.arange(len(lo))
        he_edge[pairing[lo]] = np.arange(len(lo))
        if d is None:
            d = int(degrees.max()) if len(degrees) else 0
        return cls(
            n=len(degrees),
            d=int(d),
            offsets=offsets,
            pairing=pairing,
            edge_u=he_vertex[lo],
            edge_v=he_vertex[pairing[lo]],
            he_edge=he_edge,
        )

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], degrees=None, d=None,
                   free_slots=()) -> "Multigraph":
        """Build a graph whose edge ids follow the order of ``edges``.

        Each endpoint takes its next slot not listed in ``free_slots``.
        ``degrees`` may exceed the realised degrees; surplus slots stay unmatched.
        """
        edges = [(int(u), int(v)) for u, v in edges]
        used = np.zeros(n, dtype=np.int64)
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) has an endpoint outside [0, {n})")
            used[u] += 1
            used[v] += 1
        degrees = used.copy() if degrees is None else np.asarray(degrees, dtype=np.int64)
        if np.any(degrees < used):
            raise ValueError("degree sequence smaller than realised degrees")
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(degrees, out=offsets[1:])
        pairing = np.full(int(offsets[-1]), -1, dtype=np.int64)
        he_edge = np.full(int(offsets[-1]), -1, dtype=np.int64)
        reserved = {int(offsets[v]) + int(r) for v, r in free_slots}
        nxt = offsets[:-1].copy()

        def take(x):
            while nxt[x] in reserved:
                nxt[x] += 1
            if nxt[x] >= offsets[x + 1]:
                raise ValueError(f"vertex {x} has no slot left")
            h = int(nxt[x])
            nxt[x] += 1
            return h

        for k, (u, v) in enumerate(edges):
            a = take(u)
            b = take(v)
            pairing[a], pairing[b] = b, a
            he_edge[a] = he_edge[b] = k
        if d is None:
            d = int(degrees.max()) if n else 0
        eu = np.array([e[0] for e in edges], dtype=np.int64)
        ev = np.array([e[1] for e in edges], dtype=np.int64)
        return cls(n=n, d=int(d), offsets=offsets, pairing=pairing, edge_u=eu, edge_v=ev, he_edge=he_edge)

    @property
    def m(self) -> int:
        return len(self.edge_u)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def num_half_edges(self) -> int:
        return int(self.offsets[-1])

    @cached_property
    def he_vertex(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), self.degrees)

    @cached_property
    def free_half_edges(self) -> list[tuple[int, int]]:
        """Unmatched half-edges as ``(vertex, slot)`` pairs."""
        hs = np.flatnonzero(self.pairing < 0)
        verts = self.he_vertex[hs]
        return [(int(v), int(h - self.offsets[v])) for h, v in zip(hs, verts)]

    @cached_property
    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per-vertex list of ``(neighbour, edge id)``; a self-loop appears twice."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        eu, ev = self.edge_u.tolist(), self.edge_v.tolist()
        for e, (u, v) in enumerate(zip(eu, ev)):
            adj[u].append((v, e))
            adj[v].append((u, e))
        return adj

    def edges(self) -> list[tuple[int, int, int]]:
        return [(u, v, e) for e, (u, v) in enumerate(zip(self.edge_u.tolist(), self.edge_v.tolist()))]

    def is_simple(self) -> bool:
        if np.any(self.edge_u == self.edge_v):
            return False
        lo = np.minimum(self.edge_u, self.edge_v)
        hi = np.maximum(self.edge_u, self.edge_v)
        keys = lo * self.n + hi
        return len(np.unique(keys)) == len(keys)

    # -- serialization ---------------------------------------------------
    def to_text(self) -> str:
        lines = [f"{self.n} {self.d} {self.m}"]
        lines += [f"{e} {u} {v}" for u, v, e in self.edges()]
        free = self.free_half_edges
        if free:
            lines.append("#free")
            lines += [f"{v} {r}" for v, r in free]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Multigraph":
        rows = [ln.split() for ln in text.strip().splitlines() if not ln.startswith("# ")]
        n, d, m = (int(x) for x in rows[0])
        edges = []
        for k in range(m):
            eid, u, v = (int(x) for x in rows[1 + k])
            if eid != k:
                raise ValueError(f"edge ids must be consecutive, got {eid} at line {k + 2}")
            edges.append((u, v))
        free = np.zeros(n, dtype=np.int64)
        slots = []
        rest = rows[1 + m:]
        if rest:
            if rest[0] != ["#free"]:
                raise ValueError("expected '#free' sentinel")
            for v, slot in rest[1:]:
                free[int(v)] += 1
                slots.append((int(v), int(slot)))
        used = np.zeros(n, dtype=np.int64)
        for u, v in edges:
            used[u] += 1
            used[v] += 1
        return cls.from_edges(n, edges, degrees=used + free, d=d, free_slots=slots)


def random_pairings(num_half_edges: int, size: int, seed) -> np.ndarray:
    """``size`` independent uniform perfect matchings of ``num_half_edges`` half-edges.

    Returns an array of shape ``(size, num_half_edges)`` with partner indices.
    """
    if num_half_edges % 2:
        raise ValueError("number of half-edges must be even")
    rng = as_rng(seed)
    perms = np.argsort(rng.random((size, num_half_edges)), axis=1)
    a, b = perms[:, 0::2], perms[:, 1::2]
    out = np.empty((size, num_half_edges), dtype=np.int64)
    rows = np.arange(size)[:, None]
    out[rows, a] = b
    out[rows, b] = a
    return out


def sample_configuration_model(n: int, d: int, seed) -> Multigraph:
    """Uniform perfect matching of the ``n*d`` half-edges; loops and multi-edges kept."""
    if n <= 0 or d <= 0:
        raise ValueError("n and d must be positive")
    if (n * d) % 2:
        raise ValueError(f"n*d must be even (n={n}, d={d})")
    rng = as_rng(seed)
    H = n * d
    perm = rng.permutation(H)
    pairing = np.empty(H, dtype=np.int64)
    pairing[perm[0::2]] = perm[1::2]
    pairing[perm[1::2]] = perm[0::2]
    return Multigraph.from_pairing(np.full(n, d), pairing, d=d)


def sample_exact_edge_model(degree_seq, m: int, seed, d: int | None = None) -> Multigraph:
    """Uniform choice of ``2m`` half-edges together with a uniform matching on them."""
    degrees = np.asarray(degree_seq, dtype=np.int64)
    if np.any(degrees < 0):
        raise ValueError("degrees must be non-negative")
    H = int(degrees.sum())
    if m < 0 or 2 * m > H:
        raise ValueError(f"cannot place {m} edges on {H} half-edges")
    rng = as_rng(seed)
    chosen = rng.choice(H, size=2 * m, replace=False) if m else np.empty(0, dtype=np.int64)
    pairing = np.full(H, -1, dtype=np.int64)
    pairing[chosen[0::2]] = chosen[1::2]
    pairing[chosen[1::2]] = chosen[0::2]
    return Multigraph.from_pairing(degrees, pairing, d=d)


# -- local structure -----------------------------------------------------------

@dataclass(frozen=True)
class Ball:
    center: int
    radius: int
    vertices: frozenset
    edges: frozenset
    sphere: frozenset
    excess: int
    dist: dict = field(repr=False, compare=False)


@dataclass(frozen=True)
class ComponentLabelling:
    labels: np.ndarray
    sizes: dict
    count: int

    def largest(self) -> tuple[int, int]:
        """(label, size) of the largest component; ties go to the smallest label."""
        lab = min(self.sizes, key=lambda k: (-self.sizes[k], k))
        return lab, self.sizes[lab]


def bfs_distances(G: Multigraph, v: int, radius: int | None = None) -> dict:
    dist = {v: 0}
    queue = deque([v])
    adj = G.adjacency
    while queue:
        x = queue.popleft()
        dx = dist[x]
        if radius is not None and dx >= radius:
            continue
        for y, _ in adj[x]:
            if y not in dist:
                dist[y] = dx + 1
                queue.append(y)
    return dist


def ball(G: Multigraph, v: int, radius: int) -> Ball:
    """Subgraph induced by the vertices within distance ``radius`` of ``v``.

    At radius 0 the ball has no edges, including self-loops at ``v``.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    dist = bfs_distances(G, v, radius)
    verts = frozenset(dist)
    edges = set()
    if radius > 0:
        for x in verts:
            for y, e in G.adjacency[x]:
                if y in dist:
                    edges.add(e)
    sphere = frozenset(x for x, dx in dist.items() if dx == radius)
    # BFS balls are connected, so excess = |E| - |V| + 1.
    excess = len(edges) - len(verts) + 1
    return Ball(v, radius, verts, frozenset(edges), sphere, excess, dist)


def components(n: int, edges, edge_u=None, edge_v=None) -> ComponentLabelling:
    """Connected components of ``([n], edges)``; each label is the smallest vertex id.

    ``edges`` is either an iterable of ``(u, v)`` pairs, or an iterable of
    edge ids when ``edge_u``/``edge_v`` endpoint arrays are supplied.
    """
    uf = UnionFind(n)
    if edge_u is not None:
        eu, ev = edge_u, edge_v
        for e in edges:
            uf.union(int(eu[e]), int(ev[e]))
    else:
        for u, v in edges:
            uf.union(int(u), int(v))
    roots = [uf.find(x) for x in range(n)]
    root_min: dict[int, int] = {}
    for x, r in enumerate(roots):
        if r not in root_min:
            root_min[r] = x
    labels = np.fromiter((root_min[r] for r in roots), dtype=np.int64, count=n)
    sizes: dict[int, int] = {}
    for lab in labels.tolist():
        sizes[lab] = sizes.get(lab, 0) + 1
    return ComponentLabelling(labels, sizes, len(sizes))


def graph_components(G: Multigraph, member=None) -> ComponentLabelling:
    """Components of ``(V, F)`` where ``member`` is a boolean mask over edge ids."""
    ids = range(G.m) if member is None else np.flatnonzero(member)
    return components(G.n, ids, G.edge_u, G.edge_v)


def find_avoiding_path(G: Multigraph, v: int, length: int, forbidden, budget: int = DFS_BUDGET):
    """A simple path with exactly ``length`` edges from ``v`` avoiding ``forbidden``, or None."""
    forbidden = forbidden if isinstance(forbidden, (set, frozenset)) else set(forbidden)
    if v in forbidden:
        return None
    if length == 0:
        return [v]
    adj = G.adjacency
    path = [v]
    on_path = {v}
    stack = [iter(adj[v])]
    visited = 0
    while stack:
        advanced = False
        for y, _ in stack[-1]:
            visited += 1
            if visited > budget:
                raise BudgetExceeded(f"path search exceeded {budget} states")
            if y in on_path or y in forbidden:
                continue
            path.append(y)
            if len(path) - 1 == length:
                return path
            on_path.add(y)
            stack.append(iter(adj[y]))
            advanced = True
            break
        if not advanced:
            stack.pop()
            on_path.discard(path.pop())
    return None


def exists_avoiding_path(G: Multigraph, v: int, length: int, forbidden, budget: int = DFS_BUDGET) -> bool:
    return find_avoiding_path(G, v, length, forbidden, budget) is not None
