"""Edge potentials and clique potential tables.

An edge potential compares a template distance to a scene distance: it is a
unimodal function of the difference, peaked at zero.  Two shapes are
supported: a Gaussian, and an indicator for exact matching.  Potentials are
clamped to have finite dynamic range d, which max-product convergence on
the cyclic clique chain requires.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import PointPattern, distance_matrix
from .topology import CliqueChain, edge_ownership

__all__ = [
    "PotentialParams",
    "CliqueTables",
    "edge_potential",
    "clamp",
    "build_clique_tables",
    "SIGMA_SYNTHETIC",
    "SIGMA_PIXEL",
    "DEFAULT_DYNAMIC_RANGE",
]

SIGMA_SYNTHETIC = 0.4  # unit-square synthetic data
SIGMA_PIXEL = 150.0  # pixel-coordinate landmark data
DEFAULT_DYNAMIC_RANGE = 1000.0


@dataclass(frozen=True)
class PotentialParams:
    sigma: float = SIGMA_SYNTHETIC
    mode: str = "gaussian"  # "gaussian" | "delta"
    delta_tol: float | None = None  # None = 1e-9 * template diameter, set at build time
    dynamic_range_d: float = DEFAULT_DYNAMIC_RANGE
    clamp_mode: str = "per_edge"  # "per_edge" | "per_clique"

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be finite and positive, got {self.sigma}")
        if self.mode not in ("gaussian", "delta"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.delta_tol is not None and self.delta_tol < 0:
            raise ValueError("delta_tol must be >= 0")
        if not self.dynamic_range_d >= 1 + 1e-9:
            raise ValueError(f"dynamic_range_d must exceed 1, got {self.dynamic_range_d}")
        if self.clamp_mode not in ("per_edge", "per_clique"):
            raise ValueError(f"unknown clamp_mode {self.clamp_mode!r}")

    def resolved(self, template_diameter: float) -> "PotentialParams":
        """Fill in the automatic delta tolerance for a concrete template."""
        if self.delta_tol is not None:
            return self
        return replace(self, delta_tol=1e-9 * template_diameter)


def edge_potential(dt, ds, params: PotentialParams):
    """Potential for a template distance `dt` against a scene distance `ds`.

    Gaussian mode: exp(-(dt - ds)^2 / (2 sigma^2)).  Delta mode: 1 when
    |dt - ds| <= delta_tol, else 0.  Accepts scalars or arrays.
    """
    diff = np.asarray(dt, dtype=np.float64) - np.asarray(ds, dtype=np.float64)
    if params.mode == "gaussian":
        out = np.exp(-(diff * diff) / (2.0 * params.sigma**2))
    else:
        tol = params.delta_tol if params.delta_tol is not None else 0.0
        out = (np.abs(diff) <= tol).astype(np.float64)
    return float(out) if out.ndim == 0 else out


def clamp(v, d: float):
    """Affine squeeze of [0, 1] into [1/d, 1]; order-preserving, so it never
    moves an argmax."""
    out = (1.0 / d) + (1.0 - 1.0 / d) * np.asarray(v, dtype=np.float64)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CliqueTables:
    """Potential tables for a clique chain, stacked as one (n, m, m, m) array.

    values[i][a, b, c] is the potential of clique i when its three member
    variables (in clique order) take scene values a, b, c.  Each table is
    the product over the edges *owned* by that clique only, so the product
    of all tables equals the product of all edge potentials exactly once.
    """

    cliques: tuple
    values: np.ndarray

    @property
    def n(self) -> int:
        return len(self.cliques)

    @property
    def m(self) -> int:
        return self.values.shape[1]


def build_clique_tables(
    template: PointPattern,
    scene: PointPattern,
    chain: CliqueChain,
    params: PotentialParams,
    ownership: dict | None = None,
) -> CliqueTables:
    """Assemble per-clique potential tables of shape m^3 under edge ownership.

    Work and memory are Θ(n m^3): one m x m x m table per clique, versus the
    m^4 tables of the junction-tree baseline.
    """
    n, m = len(template), len(scene)
    if chain.n != n:
        raise ValueError(f"chain is over {chain.n} vertices but template has {n} points")
    if m < 1:
        raise ValueError("scene must contain at least one point")
    if ownership is None:
        ownership = edge_ownership(chain)

    params = params.resolved(template.diameter)
    dt = distance_matrix(template)
    ds = distance_matrix(scene)
    d = params.dynamic_range_d

    if ownership == edge_ownership(chain) and all(
        cl == (ci, (ci + 1) % n, (ci + 2) % n) for ci, cl in enumerate(chain.cliques)
    ):
        # standard chain: clique i owns (i, i+1) on axes (0, 1) and (i, i+2)
        # on axes (0, 2); batch all 2n edge potentials (ds is symmetric, so
        # orientation is free)
        idx = np.arange(n)
        pot_cycle = edge_potential(dt[idx, (idx + 1) % n][:, None, None], ds[None], params)
        pot_chord = edge_potential(dt[idx, (idx + 2) % n][:, None, None], ds[None], params)
        if params.clamp_mode == "per_edge":
            pot_cycle = clamp(pot_cycle, d)
            pot_chord = clamp(pot_chord, d)
        tables = pot_cycle[:, :, :, None] * pot_chord[:, :, None, :]
        if params.clamp_mode == "per_clique":
            tables = clamp(tables, d)
        return CliqueTables(cliques=chain.cliques, values=tables)

    owned = [[] for _ in range(chain.n)]
    for edge, ci in ownership.items():
        owned[ci].append(edge)

    tables = np.empty((chain.n, m, m, m), dtype=np.float64)
    for ci, clique in enumerate(chain.cliques):
        axis_of = {v: k for k, v in enumerate(clique)}
        acc = np.ones((m, m, m), dtype=np.float64)
        for u, v in owned[ci]:
            if u not in axis_of or v not in axis_of:
                raise ValueError(f"owned edge ({u}, {v}) not inside clique {clique}")
            pot = edge_potential(dt[u, v], ds, params)
            if params.clamp_mode == "per_edge":
                pot = clamp(pot, d)
            i, j = axis_of[u], axis_of[v]
            if i > j:
                pot, i, j = pot.T, j, i
            free = ({0, 1, 2} - {i, j}).pop()
            acc = acc * np.expand_dims(pot, axis=free)
        if params.clamp_mode == "per_clique":
            acc = clamp(acc, d)
        tables[ci] = acc
    return CliqueTables(cliques=chain.cliques, values=tables)
