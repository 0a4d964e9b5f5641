"""Rendezvous on cycles, circulants and hypercubes.

Each player describes positions in their own frame; the hidden relabelling is
a uniformly random automorphism phi, and y at own vertex v is at phi(v) in x's
frame. A walk lists positions v_0..v_T, so a horizon T counts moves, and a
meeting at position index i has tau = i + 1 (index 0 is the starting vertex).
Both players start at their own vertex 0.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Optional

import numpy as np

from rendezvous.codes import build_binary_code
from rendezvous.core import DomainError, MeetingRecord


def _prime_factors(n: int) -> list:
    out, p = [], 2
    while p * p <= n:
        while n % p == 0:
            out.append(p)
            n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


class Graph:
    n: int

    def neighbors(self, v: int) -> np.ndarray:
        raise NotImplementedError

    def sample_automorphism_maps(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """(size, n) vertex maps, each a uniform automorphism."""
        raise NotImplementedError

    def automorphism_order(self) -> int:
        raise NotImplementedError

    def all_automorphism_maps(self) -> np.ndarray:
        raise NotImplementedError

    def hamiltonian_cycle(self) -> Optional[np.ndarray]:
        return None

    def describe(self) -> str:
        raise NotImplementedError

    def adjacent_or_equal(self, u: int, v: int) -> bool:
        return u == v or int(v) in set(self.neighbors(int(u)).tolist())

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=bool)
        for v in range(self.n):
            a[v, self.neighbors(v)] = True
        return a

    @cached_property
    def step_ok(self) -> np.ndarray:
        """Boolean (n, n) matrix: True where a move (or stay) u -> v is legal."""
        a = self.adjacency.copy()
        np.fill_diagonal(a, True)
        return a

    def edges(self):
        for u in range(self.n):
            for v in self.neighbors(u):
                if u < v:
                    yield u, int(v)

    def bfs_distances(self, source: int) -> np.ndarray:
        dist = np.full(self.n, -1, dtype=np.int64)
        dist[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for v in self.neighbors(u):
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(int(v))
        return dist

    @cached_property
    def diameter(self) -> int:
        # vertex-transitive: eccentricity of 0 is the diameter
        return int(self.bfs_distances(0).max())

    def shortest_path(self, u: int, v: int) -> list:
        """Vertices after u on a shortest path to v, ties broken by smallest index."""
        dist = self.bfs_distances(v)
        path, cur = [], u
        while cur != v:
            nbrs = self.neighbors(cur)
            cur = int(min(w for w in nbrs if dist[w] == dist[cur] - 1))
            path.append(cur)
        return path


@dataclass(frozen=True)
class Cycle(Graph):
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise DomainError("a cycle needs n >= 3")

    def neighbors(self, v):
        return np.array(sorted({(v - 1) % self.n, (v + 1) % self.n}), dtype=np.int64)

    def sample_automorphism_maps(self, rng, size):
        return _dihedral_maps(self.n, rng.integers(0, self.n, size), rng.integers(0, 2, size))

    def automorphism_order(self):
        return 2 * self.n

    def all_automorphism_maps(self):
        s, f = np.meshgrid(np.arange(self.n), np.arange(2), indexing="ij")
        return _dihedral_maps(self.n, s.ravel(), f.ravel())

    def hamiltonian_cycle(self):
        return np.arange(self.n, dtype=np.int64)

    @cached_property
    def diameter(self):
        return self.n // 2

    def describe(self):
        return f"cycle:{self.n}"


@dataclass(frozen=True)
class Circulant(Graph):
    """Vertices Z_n, edges i ~ i +- j for 1 <= j <= k."""

    n: int
    k: int

    def __post_init__(self):
        if not 1 <= self.k < self.n // 2:
            raise DomainError("need 1 <= k < floor(n/2)")
        if min(_prime_factors(self.n)) <= 2 * self.k:
            raise DomainError(
                f"every prime factor of n must exceed 2k = {2 * self.k} so velocity differences are invertible"
            )

    def neighbors(self, v):
        out = {(v + j) % self.n for j in range(1, self.k + 1)} | {(v - j) % self.n for j in range(1, self.k + 1)}
        return np.array(sorted(out), dtype=np.int64)

    def sample_automorphism_maps(self, rng, size):
        return _dihedral_maps(self.n, rng.integers(0, self.n, size), rng.integers(0, 2, size))

    def automorphism_order(self):
        return 2 * self.n

    def all_automorphism_maps(self):
        s, f = np.meshgrid(np.arange(self.n), np.arange(2), indexing="ij")
        return _dihedral_maps(self.n, s.ravel(), f.ravel())

    def hamiltonian_cycle(self):
        return np.arange(self.n, dtype=np.int64)

    def describe(self):
        return f"circulant:{self.n}:{self.k}"


@dataclass(frozen=True)
class Hypercube(Graph):
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError("dimension must be >= 1")

    @property
    def n(self):
        return 1 << self.dim

    def neighbors(self, v):
        return np.array(sorted(v ^ (1 << b) for b in range(self.dim)), dtype=np.int64)

    def _maps(self, bitperms, masks):
        v = np.arange(self.n, dtype=np.int64)
        bits = (v[None, :] >> np.arange(self.dim)[:, None]) & 1  # (dim, n)
        out = np.zeros((len(masks), self.n), dtype=np.int64)
        for b in range(self.dim):
            # bit b of v moves to position bitperms[:, b]
            out |= bits[b][None, :] << bitperms[:, b][:, None]
        return (out ^ np.asarray(masks, dtype=np.int64)[:, None]).astype(np.int32)

    def sample_automorphism_maps(self, rng, size):
        bitperms = np.argsort(rng.random((size, self.dim)), axis=1)
        masks = rng.integers(0, self.n, size)
        return self._maps(bitperms, masks)

    def automorphism_order(self):
        return self.n * math.factorial(self.dim)

    def all_automorphism_maps(self):
        perms = np.array(list(itertools.permutations(range(self.dim))), dtype=np.int64)
        bp = np.repeat(perms, self.n, axis=0)
        masks = np.tile(np.arange(self.n), len(perms))
        return self._maps(bp, masks)

    def hamiltonian_cycle(self):
        g = np.arange(self.n, dtype=np.int64)
        return g ^ (g >> 1)  # reflected Gray code

    @cached_property
    def diameter(self):
        return self.dim

    def describe(self):
        return f"hypercube:{self.dim}"


def _dihedral_maps(n, shifts, flips):
    v = np.arange(n, dtype=np.int64)
    sign = np.where(np.asarray(flips) == 1, -1, 1)
    return ((np.asarray(shifts)[:, None] + sign[:, None] * v[None, :]) % n).astype(np.int32)


def parse_graph(text: str) -> Graph:
    parts = text.strip().lower().split(":")
    try:
        if parts[0] == "cycle" and len(parts) == 2:
            return Cycle(int(parts[1]))
        if parts[0] == "circulant" and len(parts) == 3:
            return Circulant(int(parts[1]), int(parts[2]))
        if parts[0] == "hypercube" and len(parts) == 2:
            return Hypercube(int(parts[1]))
    except ValueError as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(f"bad graph descriptor {text!r}") from exc
    raise DomainError(f"bad graph descriptor {text!r}; use cycle:N, circulant:N:K or hypercube:D")


# ---------------------------------------------------------------------------
# Automorphisms and walks
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GraphAutomorphism:
    graph: Graph
    vertex_map: np.ndarray  # vertex_map[v] is the image of v

    def __call__(self, v: int) -> int:
        return int(self.vertex_map[v])

    def preserves_adjacency(self) -> bool:
        m = self.vertex_map
        if sorted(m.tolist()) != list(range(self.graph.n)):
            return False
        return all(self.graph.adjacency[m[u], m[v]] for u, v in self.graph.edges())


def sample_automorphism(G: Graph, rng: np.random.Generator) -> GraphAutomorphism:
    return GraphAutomorphism(G, G.sample_automorphism_maps(rng, 1)[0])


def identity_automorphism(G: Graph) -> GraphAutomorphism:
    return GraphAutomorphism(G, np.arange(G.n, dtype=np.int32))


@dataclass(frozen=True, eq=False)
class GraphWalk:
    graph: Graph
    vertices: tuple

    def __post_init__(self):
        vs = tuple(int(v) for v in self.vertices)
        object.__setattr__(self, "vertices", vs)
        if not vs:
            raise DomainError("a walk needs a starting vertex")
        arr = np.asarray(vs)
        if arr.min() < 0 or arr.max() >= self.graph.n:
            raise DomainError("vertex outside the graph")
        ok = self.graph.step_ok[arr[:-1], arr[1:]]
        if not ok.all():
            t = int(np.flatnonzero(~ok)[0])
            raise DomainError(f"illegal move {vs[t]} -> {vs[t + 1]} at step {t + 1}")

    @property
    def T(self) -> int:
        return len(self.vertices) - 1

    def moves(self) -> tuple:
        """Signed moves on a cycle, in {-1, 0, 1}."""
        n = self.graph.n
        return tuple(((b - a + 1) % n) - 1 for a, b in zip(self.vertices, self.vertices[1:]))


def graph_rendezvous_time(wx: GraphWalk, wy: GraphWalk, phi: GraphAutomorphism,
                          edge_meeting: bool = False) -> MeetingRecord:
    if wx.graph != wy.graph:
        raise DomainError("walks on different graphs")
    m = phi.vertex_map
    prev_x = prev_y = None
    for i, (a, b) in enumerate(zip(wx.vertices, wy.vertices)):
        yb = int(m[b])
        if a == yb:
            return MeetingRecord(True, i + 1)
        if edge_meeting and i > 0 and a == prev_y and yb == prev_x and a != prev_x:
            return MeetingRecord(True, i + 1)
        prev_x, prev_y = a, yb
    return MeetingRecord(False)


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------


def alpern_cycle_schedule(n: int, horizon: int, rng: np.random.Generator) -> GraphWalk:
    """Walk n/2 steps in a random direction, then pick a new direction, and so on."""
    if n % 2:
        raise DomainError("n must be even")
    half = n // 2
    blocks = -(-horizon // half)
    dirs = np.repeat(rng.choice([-1, 1], size=blocks), half)[:horizon]
    pos = np.concatenate([[0], np.cumsum(dirs)]) % n
    return GraphWalk(Cycle(n), tuple(pos.tolist()))


def circulant_velocity_schedule(n: int, k: int, rng: np.random.Generator,
                                horizon: Optional[int] = None) -> GraphWalk:
    """Fixed velocity j uniform in -k..k: position j t mod n."""
    G = Circulant(n, k)
    j = int(rng.integers(-k, k + 1))
    T = n if horizon is None else horizon
    return GraphWalk(G, tuple(((j * np.arange(T + 1)) % n).tolist()))


def circulant_exact_failure(n: int, k: int, T: int, edge_meeting: bool = False) -> Fraction:
    """Failure by move T of the velocity strategy, by enumerating j1, j2 and Aut(G)."""
    G = Circulant(n, k)
    maps = G.all_automorphism_maps().astype(np.int64)
    t = np.arange(T + 1)
    vel = np.arange(-k, k + 1)
    paths = (vel[:, None] * t[None, :]) % n  # (2k+1, T+1)
    fails = 0
    for x in paths:
        ys = maps[:, paths]  # (|Aut|, 2k+1, T+1) images of every y path
        hit = ys == x[None, None, :]
        if edge_meeting:
            swap = (ys[:, :, 1:] == x[None, None, :-1]) & (ys[:, :, :-1] == x[None, None, 1:]) & (x[1:] != x[:-1])
            hit[:, :, 1:] |= swap
        fails += int((~hit.any(axis=2)).sum())
    total = len(vel) ** 2 * len(maps)
    return Fraction(fails, total)


def circulant_failure_formula(n: int, k: int) -> Fraction:
    """Failure at T >= n-1: equal effective velocities and distinct starts."""
    return Fraction(n - 1, n * (2 * k + 1))


def spanning_tree_schedule(G: Graph, rng: Optional[np.random.Generator] = None) -> GraphWalk:
    """Closed depth-first traversal of a spanning tree rooted at vertex 0 (2(n-1) moves).

    Neighbours are explored in increasing order, or in a random order when a
    generator is supplied.
    """
    seen = np.zeros(G.n, dtype=bool)
    walk = [0]
    seen[0] = True
    stack = [(0, iter(_order(G.neighbors(0), rng)))]
    while stack:
        v, it = stack[-1]
        for w in it:
            w = int(w)
            if not seen[w]:
                seen[w] = True
                walk.append(w)
                stack.append((w, iter(_order(G.neighbors(w), rng))))
                break
        else:
            stack.pop()
            if stack:
                walk.append(stack[-1][0])
    return GraphWalk(G, tuple(walk))


def _order(nbrs, rng):
    return nbrs if rng is None else rng.permutation(nbrs)


def default_code_k(G: Graph) -> int:
    return max(1, round(0.5 * math.log2(G.n / G.diameter)))


@dataclass(frozen=True)
class GraphCodePlan:
    """Rows of the top k binary-code rows, laid along a closed covering walk.

    Label l of the code maps to path[floor((l mod 2^d) * L / 2^d)], so
    consecutive labels map to equal or adjacent vertices. The code length is
    split into 2^k blocks and each block is preceded by ``delta`` transition
    columns spent moving along a shortest path to the block's first vertex.
    """

    graph: Graph
    k: int
    path: tuple  # closed covering walk starting at vertex 0
    delta: int

    @cached_property
    def d(self) -> int:
        return max(1, (len(self.path) - 1).bit_length())

    @cached_property
    def code_rows(self) -> np.ndarray:
        code = build_binary_code(self.d)
        if self.k > code.size:
            raise DomainError(f"k must be at most {code.size}")
        return np.asarray(code.rows[: self.k])

    @property
    def block_len(self) -> int:
        return 4 * (1 << self.d) // (1 << self.k)

    @property
    def length(self) -> int:
        return 4 * (1 << self.d) + (1 << self.k) * self.delta

    @cached_property
    def row_vertices(self) -> np.ndarray:
        L = len(self.path)
        top = 1 << self.d
        idx = ((self.code_rows % top) * L) // top
        return np.asarray(self.path)[idx]

    def segment(self, row: int, start: int) -> np.ndarray:
        """Positions after ``start`` for one code length (``length`` entries)."""
        verts = self.row_vertices[row]
        out = []
        cur = start
        for b in range(1 << self.k):
            block = verts[b * self.block_len:(b + 1) * self.block_len]
            trans = self.graph.shortest_path(cur, int(block[0]))
            if len(trans) > self.delta:
                raise DomainError("transition longer than the allotted columns")
            out.extend(trans + [int(block[0])] * (self.delta - len(trans)))
            out.extend(int(v) for v in block)
            cur = int(block[-1])
        return np.array(out, dtype=np.int32)

    @cached_property
    def end_vertices(self) -> tuple:
        return tuple(int(self.row_vertices[r][-1]) for r in range(self.k))

    @cached_property
    def segment_table(self):
        """Segments for every (start state, row); state 0 is the origin, state s+1 the end of row s."""
        starts = (0,) + self.end_vertices
        uniq = sorted(set(starts))
        table = np.stack([np.stack([self.segment(r, s) for r in range(self.k)]) for s in uniq])
        return {s: i for i, s in enumerate(uniq)}, table


def hamiltonian_plan(G: Graph, k: Optional[int] = None, spanning_tree: bool = False) -> GraphCodePlan:
    k = default_code_k(G) if k is None else k
    if k < 1:
        raise DomainError("k must be positive")
    ham = None if spanning_tree else G.hamiltonian_cycle()
    if ham is None:
        path = spanning_tree_schedule(G).vertices[:-1]
    else:
        path = tuple(int(v) for v in ham)
    return GraphCodePlan(G, k, tuple(path), G.diameter)


def hamiltonian_code_schedule(G: Graph, k: Optional[int], rng: np.random.Generator,
                              spanning_tree: bool = False) -> GraphWalk:
    """One code length of the simulated code strategy, starting from vertex 0."""
    plan = hamiltonian_plan(G, k, spanning_tree)
    row = int(rng.integers(0, plan.k))
    return GraphWalk(G, (0,) + tuple(plan.segment(row, 0).tolist()))


# ---------------------------------------------------------------------------
# Strobe map and the cycle bound
# ---------------------------------------------------------------------------


def strobe_map(w: GraphWalk, m: Optional[int] = None) -> GraphWalk:
    G = w.graph
    if not isinstance(G, Cycle) or G.n % 6:
        raise DomainError("strobe map needs a cycle whose length is a multiple of 6")
    m = G.n // 6 if m is None else m
    if m != G.n // 6:
        raise DomainError("m must equal n/6")
    if w.T % m:
        raise DomainError("walk length must be a multiple of m")
    vs = np.asarray(w.vertices[::m])
    return GraphWalk(Cycle(6), tuple((vs // m).tolist()))


def cycle_lower_bound(T: float, n: int) -> float:
    if n % 6:
        raise DomainError("n must be a multiple of 6")
    return 0.5 * 3.0 ** (-6 * T / n)


# ---------------------------------------------------------------------------
# Batched samplers for simulation
# ---------------------------------------------------------------------------


class GraphStrategy:
    """Walk sampler: ``start`` draws per-player state, ``segment`` extends the walk."""

    def segment_length(self, G: Graph) -> int:
        raise NotImplementedError

    def check(self, G: Graph) -> None:
        pass

    def start(self, rng, size, G):
        return None

    def segment(self, state, rng, prev, index, G) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Alpern(GraphStrategy):
    def check(self, G):
        if not isinstance(G, Cycle) or G.n % 2:
            raise DomainError("the direction strategy needs an even cycle")

    def segment_length(self, G):
        return G.n // 2

    def segment(self, state, rng, prev, index, G):
        half = G.n // 2
        d = rng.choice(np.array([-1, 1]), size=prev.shape[0])
        return ((prev[:, None] + d[:, None] * np.arange(1, half + 1)[None, :]) % G.n).astype(np.int32)

    def describe(self):
        return "alpern"


@dataclass(frozen=True)
class Velocity(GraphStrategy):
    def check(self, G):
        if not isinstance(G, Circulant):
            raise DomainError("the velocity strategy needs a circulant graph")

    def segment_length(self, G):
        return G.n

    def start(self, rng, size, G):
        return rng.integers(-G.k, G.k + 1, size)

    def segment(self, state, rng, prev, index, G):
        L = G.n
        t = np.arange(1, L + 1)
        return ((prev[:, None] + state[:, None] * t[None, :]) % G.n).astype(np.int32)

    def describe(self):
        return "velocity"


@dataclass(frozen=True)
class CodeWalk(GraphStrategy):
    k: Optional[int] = None
    spanning_tree: bool = False

    def plan(self, G):
        return _cached_plan(G, self.k, self.spanning_tree)

    def segment_length(self, G):
        return self.plan(G).length

    def segment(self, state, rng, prev, index, G):
        plan = self.plan(G)
        lookup, table = plan.segment_table
        rows = rng.integers(0, plan.k, prev.shape[0])
        s = np.array([lookup[int(v)] for v in prev], dtype=np.int64)
        return table[s, rows]

    def describe(self):
        base = "treecode" if self.spanning_tree else "hamcode"
        return base if self.k is None else f"{base}:k={self.k}"


@lru_cache(maxsize=16)
def _cached_plan(G, k, spanning_tree):
    return hamiltonian_plan(G, k, spanning_tree)


def parse_graph_strategy(text: str) -> GraphStrategy:
    parts = text.strip().lower().split(":")
    kv = dict(p.split("=", 1) for p in parts[1:] if "=" in p)
    if parts[0] == "alpern":
        return Alpern()
    if parts[0] == "velocity":
        return Velocity()
    if parts[0] in ("hamcode", "treecode"):
        k = int(kv["k"]) if "k" in kv else None
        return CodeWalk(k, parts[0] == "treecode")
    raise DomainError(f"unknown graph strategy {text!r}; use alpern, velocity, hamcode[:k=K] or treecode[:k=K]")
