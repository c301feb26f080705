"""Max-product belief propagation around the cyclic clique chain.

Messages live on the directed separators of the chain.  forward[i] is the
message from clique i to clique i+1, an m x m table over the shared pair
(x_{i+1}, x_{i+2}); backward[i] goes from clique i to clique i-1 over
(x_i, x_{i+1}).  One sweep refreshes all 2n messages at Theta(n m^3) cost:
each update maximizes the clique table times the incoming message over the
single variable outside the separator.

On a single cycle the fixed point of max-product decodes the exact MAP
assignment even though the computed marginals are unreliable; we therefore
only ever decode, never report marginals.  Convergence is declared when the
per-clique normalized beliefs move by less than an MSE cutoff for every
clique, with an enforced minimum number of sweeps.

The module also builds the pairwise "mega-node" view of the same model
(each clique collapsed to one variable with m^3 states, incompatible
neighbor states penalized by a constant rho), used to cross-validate that
its messages replicate the clique-chain messages along the free axis.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import PointPattern, assignment_collisions, objective_residual
from .potentials import CliqueTables, PotentialParams, build_clique_tables
from .topology import CliqueChain, ResourceLimitError, build_squared_cycle, clique_chain

__all__ = [
    "ConvergenceConfig",
    "MessageState",
    "MatchResult",
    "default_mse_cutoff",
    "init_messages",
    "bp_iterate",
    "beliefs",
    "check_convergence",
    "decode",
    "match_bp",
    "MegaNodeModel",
    "build_meganode_model",
    "run_meganode_bp",
]

DEFAULT_MIN_ITERATIONS = 5
DEFAULT_MAX_ITERATIONS = 100


def default_mse_cutoff(m: int) -> float:
    """Belief-change cutoff: 1e-8, tightened to 1e-9 for scenes of 30+."""
    return 1e-9 if m >= 30 else 1e-8


@dataclass(frozen=True)
class ConvergenceConfig:
    mse_cutoff: float
    min_iterations: int = DEFAULT_MIN_ITERATIONS
    max_iterations: int = DEFAULT_MAX_ITERATIONS

    def __post_init__(self):
        if not (np.isfinite(self.mse_cutoff) and self.mse_cutoff > 0):
            raise ValueError(f"mse_cutoff must be positive, got {self.mse_cutoff}")
        if self.min_iterations > self.max_iterations:
            raise ValueError(
                f"min_iterations {self.min_iterations} exceeds "
                f"max_iterations {self.max_iterations}"
            )

    @classmethod
    def for_scene_size(cls, m: int, **kw) -> "ConvergenceConfig":
        kw.setdefault("mse_cutoff", default_mse_cutoff(m))
        return cls(**kw)


@dataclass
class MessageState:
    """Message tables plus the belief snapshot used by the MSE monitor.

    prev_beliefs holds the sum-normalized beliefs of the state as of
    `iteration`; bp_iterate refreshes it so consecutive states can be
    compared directly.
    """

    forward: np.ndarray  # (n, m, m)
    backward: np.ndarray  # (n, m, m)
    iteration: int = 0
    prev_beliefs: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.forward.shape[0]

    @property
    def m(self) -> int:
        return self.forward.shape[1]


@dataclass(frozen=True)
class MatchResult:
    assignment: np.ndarray  # (n,) scene indices
    tie_sets: tuple  # per template vertex, ascending tuple of near-max scene indices
    residual: float
    iterations: int
    converged: bool
    wall_time: float
    collisions: int


# ---------------------------------------------------------------------------
# kernels

@njit(cache=True, fastmath=False)
def _sweep_sync(T, fwd, bwd, new_fwd, new_bwd):
    """One synchronous sweep: every new message reads only old messages."""
    n = T.shape[0]
    m = T.shape[1]
    for i in range(n):
        p = i - 1 if i > 0 else n - 1
        q = i + 1 if i < n - 1 else 0
        top = 0.0
        for b in range(m):
            for c in range(m):
                best = 0.0
                for a in range(m):
                    v = T[i, a, b, c] * fwd[p, a, b]
                    if v > best:
                        best = v
                new_fwd[i, b, c] = best
                if best > top:
                    top = best
        if top > 0.0:
            for b in range(m):
                for c in range(m):
                    new_fwd[i, b, c] /= top
        top = 0.0
        for a in range(m):
            for b in range(m):
                best = 0.0
                for c in range(m):
                    v = T[i, a, b, c] * bwd[q, b, c]
                    if v > best:
                        best = v
                new_bwd[i, a, b] = best
                if best > top:
                    top = best
        if top > 0.0:
            for a in range(m):
                for b in range(m):
                    new_bwd[i, a, b] /= top


@njit(cache=True, fastmath=False)
def _sweep_seq(T, fwd, bwd):
    """Sequential cyclic sweep: updates are visible to later updates in the
    same sweep (forward messages in increasing i, then backward in
    decreasing i), updating in place."""
    n = T.shape[0]
    m = T.shape[1]
    for i in range(n):
        p = i - 1 if i > 0 else n - 1
        top = 0.0
        for b in range(m):
            for c in range(m):
                best = 0.0
                for a in range(m):
                    v = T[i, a, b, c] * fwd[p, a, b]
                    if v > best:
                        best = v
                fwd[i, b, c] = best
                if best > top:
                    top = best
        if top > 0.0:
            for b in range(m):
                for c in range(m):
                    fwd[i, b, c] /= top
    for i in range(n - 1, -1, -1):
        q = i + 1 if i < n - 1 else 0
        top = 0.0
        for a in range(m):
            for b in range(m):
                best = 0.0
                for c in range(m):
                    v = T[i, a, b, c] * bwd[q, b, c]
                    if v > best:
                        best = v
                bwd[i, a, b] = best
                if best > top:
                    top = best
        if top > 0.0:
            for a in range(m):
                for b in range(m):
                    bwd[i, a, b] /= top


@njit(cache=True, fastmath=False)
def _beliefs_mse(T, fwd, bwd, prev, mse):
    """Convergence monitor: per-clique mean squared change of sum-normalized
    beliefs into `mse`, updating `prev` to the new beliefs in place."""
    n = T.shape[0]
    m = T.shape[1]
    for i in range(n):
        p = i - 1 if i > 0 else n - 1
        q = i + 1 if i < n - 1 else 0
        s = 0.0
        for a in range(m):
            for b in range(m):
                f = fwd[p, a, b]
                for c in range(m):
                    s += T[i, a, b, c] * f * bwd[q, b, c]
        inv = 1.0 / s if s > 0.0 else 0.0
        err = 0.0
        for a in range(m):
            for b in range(m):
                f = fwd[p, a, b]
                for c in range(m):
                    v = T[i, a, b, c] * f * bwd[q, b, c] * inv
                    d = v - prev[i, a, b, c]
                    err += d * d
                    prev[i, a, b, c] = v
        mse[i] = err / (m * m * m)


# ---------------------------------------------------------------------------
# public operations

def init_messages(tables: CliqueTables) -> MessageState:
    """All-ones messages; prev_beliefs = beliefs of that state (the tables
    themselves, normalized)."""
    n, m = tables.n, tables.m
    T = tables.values
    prev = T / T.sum(axis=(1, 2, 3), keepdims=True)
    return MessageState(
        forward=np.ones((n, m, m)),
        backward=np.ones((n, m, m)),
        iteration=0,
        prev_beliefs=prev,
    )


def bp_iterate(
    chain: CliqueChain,
    tables: CliqueTables,
    state: MessageState,
    schedule: str = "synchronous",
) -> MessageState:
    """One full sweep of all 2n directed messages; returns a new state with
    messages max-normalized to 1 and prev_beliefs refreshed."""
    T = tables.values
    if schedule == "synchronous":
        new_fwd = np.empty_like(state.forward)
        new_bwd = np.empty_like(state.backward)
        _sweep_sync(T, state.forward, state.backward, new_fwd, new_bwd)
    elif schedule == "sequential":
        new_fwd = state.forward.copy()
        new_bwd = state.backward.copy()
        _sweep_seq(T, new_fwd, new_bwd)
    else:
        raise ValueError(f"unknown schedule {schedule!r}")
    new = MessageState(
        forward=new_fwd,
        backward=new_bwd,
        iteration=state.iteration + 1,
    )
    new.prev_beliefs = beliefs(chain, tables, new)
    return new


def beliefs(chain: CliqueChain, tables: CliqueTables, state: MessageState) -> np.ndarray:
    """Per-clique beliefs: table times both incoming messages, normalized to
    sum 1 so the MSE monitor is scale-free.  Shape (n, m, m, m)."""
    T = tables.values
    n = T.shape[0]
    out = np.empty_like(T)
    for i in range(n):
        p = (i - 1) % n
        q = (i + 1) % n
        B = T[i] * state.forward[p][:, :, None] * state.backward[q][None, :, :]
        out[i] = B / B.sum()
    return out


def check_convergence(
    prev_beliefs: np.ndarray,
    new_beliefs: np.ndarray,
    cfg: ConvergenceConfig,
    iteration: int,
) -> bool:
    """True iff every clique's belief MSE is strictly below the cutoff and
    the minimum iteration count has been reached."""
    if prev_beliefs.shape != new_beliefs.shape:
        raise ValueError("belief shapes differ")
    if iteration < cfg.min_iterations:
        return False
    diff = new_beliefs - prev_beliefs
    mse = np.mean(diff * diff, axis=(1, 2, 3))
    return bool(np.all(mse < cfg.mse_cutoff))


def _home_cliques(chain: CliqueChain) -> list:
    """(clique index, axis) per vertex: the clique where the vertex is the
    first member, else the first clique containing it."""
    n_vertices = max(max(c) for c in chain.cliques) + 1
    home: list = [None] * n_vertices
    for ci, cl in enumerate(chain.cliques):
        if home[cl[0]] is None:
            home[cl[0]] = (ci, 0)
    for v in range(n_vertices):
        if home[v] is None:
            for ci, cl in enumerate(chain.cliques):
                if v in cl:
                    home[v] = (ci, cl.index(v))
                    break
    return home


_OTHER_AXES = {0: (1, 2), 1: (0, 2), 2: (0, 1)}


def decode(
    chain: CliqueChain,
    tables: CliqueTables,
    state: MessageState,
    cfg: ConvergenceConfig,
    *,
    template: PointPattern | None = None,
    scene: PointPattern | None = None,
    converged: bool = False,
    wall_time: float = float("nan"),
    belief_tables: np.ndarray | None = None,
) -> MatchResult:
    """MAP decode with tie sets.

    Each template vertex reads its max-belief vector from its home clique
    (maximizing the clique belief over the other two variables).  The
    assignment is the argmax, lowest scene index first; the tie set is every
    scene index whose max-belief is within sqrt(mse_cutoff) of the winner.
    """
    B = belief_tables if belief_tables is not None else beliefs(chain, tables, state)
    band = float(np.sqrt(cfg.mse_cutoff))
    n = chain.n
    homes = _home_cliques(chain)[:n]
    if all(h == (v, 0) for v, h in enumerate(homes)):
        # standard chain: every vertex leads its own clique; one batched max
        marg = B.max(axis=(2, 3))  # (n, m)
        assignment = marg.argmax(axis=1).astype(np.int64)
        winner = marg[np.arange(n), assignment]
        near_rows = marg > (winner - band)[:, None]
        tie_sets = [tuple(int(j) for j in np.flatnonzero(row)) for row in near_rows]
    else:
        assignment = np.empty(n, dtype=np.int64)
        tie_sets = []
        for v, (ci, axis) in enumerate(homes):
            marg = B[ci].max(axis=_OTHER_AXES[axis])
            w = int(np.argmax(marg))
            assignment[v] = w
            near = np.flatnonzero(marg > marg[w] - band)
            tie_sets.append(tuple(int(j) for j in near))
    if template is not None and scene is not None:
        residual = objective_residual(template, scene, assignment)
    else:
        residual = float("nan")
    return MatchResult(
        assignment=assignment,
        tie_sets=tuple(tie_sets),
        residual=residual,
        iterations=state.iteration,
        converged=converged,
        wall_time=wall_time,
        collisions=assignment_collisions(assignment),
    )


def match_bp(
    template: PointPattern,
    scene: PointPattern,
    params: PotentialParams | None = None,
    cfg: ConvergenceConfig | None = None,
    schedule: str = "synchronous",
    collect_trace: bool = False,
):
    """End-to-end matcher: squared cycle -> clique tables -> message passing
    until the belief MSE settles -> decode.

    Returns a MatchResult, or (MatchResult, trace) with collect_trace, where
    trace = {"mse": (iters, n) per-clique MSE rows, "iter_seconds": (iters,)}.
    Raises DegenerateSizeError for n < 5 (no squared cycle exists).
    """
    t0 = time.perf_counter()
    n, m = len(template), len(scene)
    if params is None:
        params = PotentialParams()
    if cfg is None:
        cfg = ConvergenceConfig.for_scene_size(m)
    if schedule not in ("synchronous", "sequential"):
        raise ValueError(f"unknown schedule {schedule!r}")

    graph = build_squared_cycle(n)
    chain = clique_chain(graph)
    tables = build_clique_tables(template, scene, chain, params)
    T = tables.values

    fwd = np.ones((n, m, m))
    bwd = np.ones((n, m, m))
    new_fwd = np.empty_like(fwd)
    new_bwd = np.empty_like(bwd)
    prev = T / T.sum(axis=(1, 2, 3), keepdims=True)  # beliefs of the all-ones state
    mse = np.empty(n)

    mse_rows = []
    iter_seconds = []
    converged = False
    iteration = 0
    while iteration < cfg.max_iterations:
        t_it = time.perf_counter()
        if schedule == "synchronous":
            _sweep_sync(T, fwd, bwd, new_fwd, new_bwd)
            fwd, new_fwd = new_fwd, fwd
            bwd, new_bwd = new_bwd, bwd
        else:
            _sweep_seq(T, fwd, bwd)
        iteration += 1
        _beliefs_mse(T, fwd, bwd, prev, mse)  # prev <- newest beliefs
        if collect_trace:
            iter_seconds.append(time.perf_counter() - t_it)
            mse_rows.append(mse.copy())
        if iteration >= cfg.min_iterations and mse.max() < cfg.mse_cutoff:
            converged = True
            break

    state = MessageState(forward=fwd, backward=bwd, iteration=iteration, prev_beliefs=prev)
    result = decode(
        chain,
        tables,
        state,
        cfg,
        template=template,
        scene=scene,
        converged=converged,
        wall_time=time.perf_counter() - t0,
        belief_tables=prev,
    )
    if collect_trace:
        trace = {"mse": np.array(mse_rows), "iter_seconds": np.array(iter_seconds)}
        return result, trace
    return result


# ---------------------------------------------------------------------------
# pairwise mega-node view (validation model)

@dataclass(frozen=True)
class MegaNodeModel:
    """Cycle of n mega-nodes, one per clique, each with m^3 states.

    edge_potentials[i] is the (m^3, m^3) table between mega-nodes i and
    i+1 mod n: a compatible pair (the trailing pair of state s equals the
    leading pair of state t) carries clique i's potential at s; any other
    pair carries the constant rho.  Tables are first divided by their
    minimum entry (argmax-preserving) so that rho, the inverse product of
    the per-clique maxima, really is smaller than every compatible entry.
    """

    n: int
    m: int
    edge_potentials: np.ndarray  # (n, m^3, m^3)
    rho: float
    table_scale: np.ndarray  # (n,) divisor applied to each clique table


def build_meganode_model(
    chain: CliqueChain,
    tables: CliqueTables,
    max_states: int = 4096,
) -> MegaNodeModel:
    n, m = tables.n, tables.m
    M = m**3
    if M > max_states:
        raise ResourceLimitError(
            f"mega-node model needs {M} states per node "
            f"({n * M * M * 8} bytes of edge tables); cap is {max_states} states"
        )
    scale = tables.values.reshape(n, M).min(axis=1)
    rescaled = tables.values.reshape(n, M) / scale[:, None]
    # rho in log space: inverse product of per-clique maxima (all >= 1 here)
    rho = float(np.exp(-np.sum(np.log(rescaled.max(axis=1)))))

    codes = np.arange(M)
    compatible = (codes[:, None] % (m * m)) == (codes[None, :] // m)
    edge = np.where(compatible[None, :, :], rescaled[:, :, None], rho)
    return MegaNodeModel(n=n, m=m, edge_potentials=edge, rho=rho, table_scale=scale)


def run_meganode_bp(model: MegaNodeModel, iterations: int) -> list:
    """Synchronous forward message passing around the mega-node cycle.

    Returns the list of (n, m^3) forward message arrays after each sweep,
    max-normalized like the clique-chain messages.  msg[i] flows from node i
    to node i+1 and is indexed by the receiving state; reshaped to
    (m, m, m) it should replicate the clique-chain forward message along the
    last (free) axis.
    """
    E = model.edge_potentials
    n, M = E.shape[0], E.shape[1]
    fwd = np.ones((n, M))
    history = []
    for _ in range(iterations):
        new = np.empty_like(fwd)
        for i in range(n):
            p = (i - 1) % n
            new[i] = (E[i] * fwd[p][:, None]).max(axis=0)
            new[i] /= new[i].max()
        fwd = new
        history.append(fwd.copy())
    return history
