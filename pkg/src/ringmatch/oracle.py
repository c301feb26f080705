"""Brute-force oracles: exhaustive MAP over all m^n assignments.

Deliberately free of cleverness (no pruning, no factor-graph tricks) so it
can serve as independent ground truth for the message-passing engines.
Enumeration is chunked and vectorized but otherwise literal: every map
x: template -> scene is scored.
"""

from __future__ import annotations

import numpy as np

from .geometry import PointPattern, distance_matrix
from .topology import ResourceLimitError

__all__ = [
    "ENUMERATION_GUARD",
    "brute_force_map",
    "brute_force_objective",
]

ENUMERATION_GUARD = 10**8
_CHUNK = 1 << 17


def _enumerate_digits(n: int, m: int, chunk: int):
    """Yield (codes, digits) blocks covering all m^n assignment vectors in
    lexicographic order; digits has shape (n, len(codes)) with vertex 0 the
    most significant position."""
    total = m**n
    powers = (m ** np.arange(n - 1, -1, -1)).astype(np.int64)
    for lo in range(0, total, chunk):
        codes = np.arange(lo, min(lo + chunk, total), dtype=np.int64)
        digits = (codes[None, :] // powers[:, None]) % m
        yield codes, digits


def _injective_mask(digits: np.ndarray) -> np.ndarray:
    srt = np.sort(digits, axis=0)
    return ~np.any(srt[1:] == srt[:-1], axis=0)


def brute_force_map(
    cliques,
    tables,
    n: int,
    m: int,
    injective: bool = False,
    chunk: int = _CHUNK,
):
    """Exact argmax over all m^n maps of the product of clique potentials.

    cliques: index tuples (any arity); tables: matching arrays, one axis per
    clique member.  Ties fall to the lexicographically smallest assignment.
    The injective flag restricts to one-to-one maps (diagnostic only; the
    model's hypothesis space is all maps).
    """
    if m**n > ENUMERATION_GUARD:
        raise ResourceLimitError(
            f"enumeration of m^n = {m}^{n} assignments exceeds the "
            f"{ENUMERATION_GUARD:.0e} guard"
        )
    if injective and n > m:
        raise ValueError(f"no injective map exists for n={n} > m={m}")

    member_rows = [np.asarray(cl, dtype=np.int64) for cl in cliques]
    best_score = -np.inf
    best_code = 0
    for codes, digits in _enumerate_digits(n, m, chunk):
        score = np.ones(codes.shape[0])
        for rows, tab in zip(member_rows, tables):
            score = score * tab[tuple(digits[rows])]
        if injective:
            score = np.where(_injective_mask(digits), score, -np.inf)
        k = int(np.argmax(score))
        if score[k] > best_score:  # strict: earlier (lower) codes win ties
            best_score = float(score[k])
            best_code = int(codes[k])

    assignment = np.empty(n, dtype=np.int64)
    rem = best_code
    for v in range(n - 1, -1, -1):
        assignment[v] = rem % m
        rem //= m
    return assignment, best_score


def brute_force_objective(
    template: PointPattern,
    scene: PointPattern,
    injective: bool = False,
    chunk: int = _CHUNK,
):
    """Exact argmin of the squared distance-matrix discrepancy over all maps.

    Returns (assignment, residual) with residual on the same scale as
    objective_residual (full matrix, both triangles counted).
    """
    n, m = len(template), len(scene)
    if m**n > ENUMERATION_GUARD:
        raise ResourceLimitError(
            f"enumeration of m^n = {m}^{n} assignments exceeds the "
            f"{ENUMERATION_GUARD:.0e} guard"
        )
    if injective and n > m:
        raise ValueError(f"no injective map exists for n={n} > m={m}")

    dt = distance_matrix(template)
    ds = distance_matrix(scene)
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]

    best_res = np.inf
    best_code = 0
    for codes, digits in _enumerate_digits(n, m, chunk):
        res = np.zeros(codes.shape[0])
        for u, v in pairs:
            diff = dt[u, v] - ds[digits[u], digits[v]]
            res += diff * diff
        res *= 2.0  # both triangles of the matrix
        if injective:
            res = np.where(_injective_mask(digits), res, np.inf)
        k = int(np.argmin(res))
        if res[k] < best_res:  # strict: lexicographically first argmin wins
            best_res = float(res[k])
            best_code = int(codes[k])

    assignment = np.empty(n, dtype=np.int64)
    rem = best_code
    for v in range(n - 1, -1, -1):
        assignment[v] = rem % m
        rem //= m
    return assignment, best_res
