"""Graph topologies for matching: the squared cycle, its clique chain, and 3-trees.

The squared cycle is a Hamiltonian cycle plus all distance-two chords.  Its
maximal cliques are the n consecutive triples, which overlap in a cyclic
chain of shared pairs; messages are passed around that chain.  The 3-tree
(K3 grown by attaching each new vertex to an existing 3-clique) is the
chordal topology used by the exact junction-tree baseline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations

import numpy as np

__all__ = [
    "DegenerateSizeError",
    "ResourceLimitError",
    "MatchGraph",
    "CliqueChain",
    "build_squared_cycle",
    "clique_chain",
    "build_three_tree",
    "is_chordal",
    "complement_edges",
    "edge_ownership",
    "graph_to_json",
    "graph_from_json",
]


class DegenerateSizeError(ValueError):
    """Raised when the squared cycle does not exist (n < 5); route such
    instances to the brute-force engine instead."""


class ResourceLimitError(RuntimeError):
    """A requested computation exceeds a configured state/memory cap.

    Raised instead of attempting allocations that would not fit (junction
    tree tables, mega-node state spaces, exhaustive enumeration).
    """


def _norm_edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class MatchGraph:
    n: int
    edges: frozenset
    kind: str  # "squared_cycle" | "three_tree"
    cycle_order: tuple | None = None  # traversal order, squared cycles only

    def __post_init__(self):
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")

    def degree(self, v: int) -> int:
        return sum(1 for e in self.edges if v in e)

    def adjacency(self) -> list:
        adj = [set() for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj


@dataclass(frozen=True)
class CliqueChain:
    """Cyclic chain of vertex triples; consecutive cliques share two vertices."""

    n: int
    cliques: tuple  # clique i = (o[i], o[i+1], o[i+2]) for traversal order o
    separators: tuple  # separator i = cliques[i] ∩ cliques[i+1], as an ordered pair


def build_squared_cycle(n: int, order=None) -> MatchGraph:
    """Cycle graph on n vertices plus every chord between vertices at cycle
    distance two.  |E| = 2n and every vertex has degree 4 (for n >= 5).

    `order` optionally gives the cycle traversal (any order is admissible);
    default is index order.
    """
    if n < 5:
        raise DegenerateSizeError(
            f"squared cycle needs n >= 5 (got n={n}); use the brute-force engine"
        )
    if order is None:
        order = tuple(range(n))
    else:
        order = tuple(int(v) for v in order)
        if sorted(order) != list(range(n)):
            raise ValueError("order must be a permutation of 0..n-1")
    edges = set()
    for i in range(n):
        edges.add(_norm_edge(order[i], order[(i + 1) % n]))
        edges.add(_norm_edge(order[i], order[(i + 2) % n]))
    return MatchGraph(n=n, edges=frozenset(edges), kind="squared_cycle", cycle_order=order)


def clique_chain(g: MatchGraph) -> CliqueChain:
    """The n overlapping triples (i, i+1, i+2) of a squared cycle, in cycle order."""
    if g.kind != "squared_cycle":
        raise ValueError(f"clique chain requires a squared cycle, got kind={g.kind!r}")
    o = g.cycle_order or tuple(range(g.n))
    n = g.n
    cliques = tuple((o[i], o[(i + 1) % n], o[(i + 2) % n]) for i in range(n))
    seps = tuple((o[(i + 1) % n], o[(i + 2) % n]) for i in range(n))
    return CliqueChain(n=n, cliques=cliques, separators=seps)


def edge_ownership(chain: CliqueChain) -> dict:
    """Assign each graph edge to exactly one clique of the chain.

    Clique i owns its (i, i+1) cycle edge and its (i, i+2) chord; the third
    within-clique pair (i+1, i+2) belongs to clique i+1.  Each edge potential
    therefore enters exactly one clique table.
    """
    own = {}
    for ci, (a, b, c) in enumerate(chain.cliques):
        own[_norm_edge(a, b)] = ci
        own[_norm_edge(a, c)] = ci
    return own


def build_three_tree(n: int, seed: int = 0) -> MatchGraph:
    """3-tree on n vertices: K3 on {0,1,2}, then each vertex v >= 3 is joined
    to the three members of an existing 3-clique picked by seeded randomness."""
    if n < 3:
        raise ValueError(f"3-tree needs n >= 3, got {n}")
    rng = np.random.default_rng(seed)
    edges = {(0, 1), (0, 2), (1, 2)}
    triangles = [(0, 1, 2)]
    for v in range(3, n):
        a, b, c = triangles[int(rng.integers(len(triangles)))]
        edges.update([_norm_edge(v, a), _norm_edge(v, b), _norm_edge(v, c)])
        triangles.extend([(a, b, v), (a, c, v), (b, c, v)])
    return MatchGraph(n=n, edges=frozenset(edges), kind="three_tree")


def attachment_triple(g: MatchGraph, v: int) -> tuple:
    """The 3-clique a 3-tree vertex v >= 3 was attached to (its lower neighbors)."""
    lower = sorted(u for e in g.edges if v in e for u in e if u != v and u < v)
    if len(lower) != 3:
        raise ValueError(f"vertex {v} has {len(lower)} lower neighbors; not a 3-tree?")
    return tuple(lower)


def is_chordal(g: MatchGraph) -> bool:
    """Maximum-cardinality search followed by perfect-elimination verification."""
    n, adj = g.n, g.adjacency()
    weight = [0] * n
    visited = [False] * n
    order = []  # MCS visit order; reversed it is a PEO iff chordal
    for _ in range(n):
        v = max((u for u in range(n) if not visited[u]), key=lambda u: (weight[u], -u))
        visited[v] = True
        order.append(v)
        for u in adj[v]:
            if not visited[u]:
                weight[u] += 1
    elim = order[::-1]
    pos = {v: i for i, v in enumerate(elim)}
    for i, v in enumerate(elim):
        later = [u for u in adj[v] if pos[u] > i]
        if not later:
            continue
        u = min(later, key=pos.get)
        if any(w != u and w not in adj[u] for w in later):
            return False
    return True


def complement_edges(g: MatchGraph) -> set:
    """All vertex pairs absent from the graph."""
    return {e for e in combinations(range(g.n), 2) if e not in g.edges}


def graph_to_json(g: MatchGraph) -> str:
    payload = {
        "n": g.n,
        "kind": g.kind,
        "edges": sorted([list(e) for e in g.edges]),
    }
    if g.cycle_order is not None:
        payload["cycle_order"] = list(g.cycle_order)
    return json.dumps(payload)


def graph_from_json(text: str) -> MatchGraph:
    data = json.loads(text)
    order = data.get("cycle_order")
    return MatchGraph(
        n=int(data["n"]),
        edges=frozenset(_norm_edge(int(u), int(v)) for u, v in data["edges"]),
        kind=str(data["kind"]),
        cycle_order=tuple(order) if order is not None else None,
    )
