"""Exact MAP matching on the chordal 3-tree model via its junction tree.

A 3-tree's junction tree has one 4-clique per added vertex (the vertex plus
the 3-clique it attached to), maximal clique size 4, and size-3 separators.
One upward and one downward max-product pass over the m^4 clique tables
give the exact MAP in Theta(n m^4) time and memory — the baseline the
cyclic chain's Theta(n m^3) sweeps are compared against.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .geometry import PointPattern, assignment_collisions, distance_matrix
from .potentials import PotentialParams, clamp, edge_potential
from .topology import MatchGraph, ResourceLimitError, attachment_triple

__all__ = [
    "JunctionTree",
    "build_junction_tree",
    "build_jt_tables",
    "jt_map",
]

DEFAULT_JT_BYTE_CAP = 2**30


@dataclass(frozen=True)
class JunctionTree:
    """Clique tree of a 3-tree.  cliques[i] is a sorted vertex quadruple;
    added[i] is the vertex whose attachment created it (the free variable
    during decoding); the root (index 0) is the clique of vertex 3."""

    n: int
    cliques: tuple  # sorted 4-tuples
    added: tuple  # added vertex per clique
    parents: tuple  # parent clique index, -1 at the root
    separators: tuple  # separator with parent (sorted 3-tuple), None at the root
    owned_edges: tuple  # per clique, edges whose potential it carries

    @property
    def root(self) -> int:
        return 0


def build_junction_tree(g: MatchGraph) -> JunctionTree:
    """One clique per added vertex, parent = clique of the newest vertex in
    the attachment triple (the base triangle {0,1,2} hangs off the root).

    The separator with the parent is exactly the attachment triple, so the
    running intersection property holds by construction.  Edge ownership:
    each clique carries its added vertex's 3 attachment edges; the root also
    carries the base triangle, for 6 = C(4,2) edges total there.
    """
    if g.kind != "three_tree":
        raise ValueError(f"junction tree requires a three_tree graph, got kind={g.kind!r}")
    if g.n < 4:
        raise ValueError(f"junction tree needs n >= 4, got n={g.n}")

    cliques, added, parents, separators, owned = [], [], [], [], []
    for v in range(3, g.n):
        att = attachment_triple(g, v)
        cliques.append(tuple(sorted((v,) + att)))
        added.append(v)
        edges = [tuple(sorted((v, a))) for a in att]
        if v == 3:
            parents.append(-1)
            separators.append(None)
            edges = [(0, 1), (0, 2), (1, 2)] + edges
        else:
            newest = max(att)
            parents.append(newest - 3 if newest >= 3 else 0)
            separators.append(att)
        owned.append(tuple(edges))
    return JunctionTree(
        n=g.n,
        cliques=tuple(cliques),
        added=tuple(added),
        parents=tuple(parents),
        separators=tuple(separators),
        owned_edges=tuple(owned),
    )


def build_jt_tables(
    template: PointPattern,
    scene: PointPattern,
    jt: JunctionTree,
    params: PotentialParams,
) -> list:
    """m^4 potential table per clique: product of the clamped potentials of
    the edges that clique owns, axes in sorted vertex order."""
    dt = distance_matrix(template)
    ds = distance_matrix(scene)
    params = params.resolved(float(dt.max()))
    return _jt_tables(dt, ds, jt, params, len(scene))


def _jt_tables(dt, ds, jt: JunctionTree, params: PotentialParams, m: int) -> list:
    # params must already be resolved (delta_tol filled in)
    d = params.dynamic_range_d

    # all owned edges' m x m potential matrices in one batch
    flat = [e for owned in jt.owned_edges for e in owned]
    us = np.array([u for u, _ in flat])
    vs = np.array([v for _, v in flat])
    pots = edge_potential(dt[us, vs][:, None, None], ds[None], params)
    if params.clamp_mode == "per_edge":
        pots = clamp(pots, d)

    tables = []
    k = 0
    full = (m, m, m, m)
    for clique, edges in zip(jt.cliques, jt.owned_edges):
        pos = {v: i for i, v in enumerate(clique)}
        acc = None
        for u, v in edges:  # u < v, so pos[u] < pos[v]: axes already aligned
            shape = [1, 1, 1, 1]
            shape[pos[u]] = m
            shape[pos[v]] = m
            factor = pots[k].reshape(shape)
            k += 1
            if acc is None:
                acc = factor
            elif acc.shape == full:
                acc *= factor
            else:  # let broadcasting grow the intermediate gradually
                acc = acc * factor
        if acc.shape != full:
            acc = np.broadcast_to(acc, full).copy()
        if params.clamp_mode == "per_clique":
            acc = clamp(acc, d)
        tables.append(acc)
    return tables


def jt_map(
    template: PointPattern,
    scene: PointPattern,
    jt: JunctionTree,
    params: PotentialParams | None = None,
    max_bytes: int = DEFAULT_JT_BYTE_CAP,
):
    """Exact MAP of the 3-tree-factorized model.

    Upward pass folds each leaf-ward clique into its parent by maximizing
    out the added vertex; the root argmax then fixes four vertices and the
    downward pass back-substitutes one added vertex per clique, so separator
    agreement is exact.  Ties fall to the lowest scene index (np.argmax).
    Raises ResourceLimitError before allocating past max_bytes.
    """
    from .bp import MatchResult  # result type shared with the chain engine

    t0 = time.perf_counter()
    n, m = len(template), len(scene)
    if n != jt.n:
        raise ValueError(f"junction tree is over {jt.n} vertices but template has {n}")
    if params is None:
        params = PotentialParams()

    ncl = len(jt.cliques)
    need = ncl * (m**4 + m**3) * 8
    if need > max_bytes:
        raise ResourceLimitError(
            f"junction tree needs about {need} bytes of clique tables "
            f"(n={n}, m={m}); cap is {max_bytes}"
        )

    dt = distance_matrix(template)
    ds = distance_matrix(scene)
    tables = _jt_tables(dt, ds, jt, params.resolved(float(dt.max())), m)

    # upward: children have larger indices than parents, so a reverse scan
    # sees every child before its parent; child messages are multiplied into
    # the parent table in place.
    for ci in range(ncl - 1, 0, -1):
        clique = jt.cliques[ci]
        free = clique.index(jt.added[ci])
        msg = tables[ci].max(axis=free)
        parent = jt.parents[ci]
        pclique = jt.cliques[parent]
        leftover = next(k for k, v in enumerate(pclique) if v not in jt.separators[ci])
        tables[parent] *= np.expand_dims(msg, axis=leftover)

    assignment = np.full(n, -1, dtype=np.int64)
    flat = int(np.argmax(tables[0]))
    for v, s in zip(jt.cliques[0], np.unravel_index(flat, tables[0].shape)):
        assignment[v] = int(s)

    # downward: every separator vertex is already assigned when its clique
    # is reached, leaving a single free variable to argmax.
    for ci in range(1, ncl):
        clique = jt.cliques[ci]
        free = clique.index(jt.added[ci])
        indexer = tuple(
            slice(None) if k == free else int(assignment[v]) for k, v in enumerate(clique)
        )
        assignment[jt.added[ci]] = int(np.argmax(tables[ci][indexer]))

    residual = float(((dt - ds[np.ix_(assignment, assignment)]) ** 2).sum())
    return MatchResult(
        assignment=assignment,
        tie_sets=tuple((int(s),) for s in assignment),
        residual=residual,
        iterations=1,
        converged=True,
        wall_time=time.perf_counter() - t0,
        collisions=assignment_collisions(assignment),
    )
