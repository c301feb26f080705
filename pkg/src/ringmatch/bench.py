"""Benchmark harness: the synthetic noise grid and the landmark-sequence run.

Every trial cell (m, eps, trial) derives its instance from the master seed
alone, so all engines see identical instances and reruns are deterministic.
Rows are sorted before writing; with timing columns suppressed the output
CSV is byte-identical across runs.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bp import ConvergenceConfig, MatchResult, default_mse_cutoff, match_bp
from .geometry import PointPattern, generate_instance, load_points
from .junction import build_junction_tree, jt_map
from .oracle import brute_force_objective
from .potentials import SIGMA_PIXEL, SIGMA_SYNTHETIC, PotentialParams
from .topology import (
    DegenerateSizeError,
    ResourceLimitError,
    build_three_tree,
)

__all__ = [
    "SCHEMA_VERSION",
    "DEFAULT_EPS_GRID",
    "BenchmarkSpec",
    "BenchmarkRow",
    "SequenceRow",
    "run_engine",
    "run_benchmark",
    "rows_to_csv",
    "summarize",
    "summary_to_csv",
    "run_sequence",
    "sequence_to_csv",
    "benchmark_spec_from_json",
]

SCHEMA_VERSION = 1
DEFAULT_EPS_GRID = tuple(k / 256.0 for k in range(5))
VALID_ENGINES = ("bp", "jt", "oracle")


@dataclass(frozen=True)
class BenchmarkSpec:
    n: int = 10
    m_values: tuple = (10, 20, 30, 40)
    eps_values: tuple = DEFAULT_EPS_GRID
    trials: int = 50
    engines: tuple = ("bp", "jt")
    sigma: float = SIGMA_SYNTHETIC
    dynamic_range_d: float = 1000.0
    cutoffs: tuple | None = None  # ((m, cutoff), ...) overrides; default by scene size
    seed: int = 0
    mode: str = "gaussian"
    min_iterations: int = 5
    max_iterations: int = 100
    tree_seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(m < self.n for m in self.m_values):
            raise ValueError(f"all scene sizes must be >= n={self.n}, got {self.m_values}")
        bad = [e for e in self.engines if e not in VALID_ENGINES]
        if bad:
            raise ValueError(f"unknown engines {bad}; valid: {VALID_ENGINES}")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")

    def cutoff_for(self, m: int) -> float:
        for mm, cut in self.cutoffs or ():
            if mm == m:
                return cut
        return default_mse_cutoff(m)


def benchmark_spec_from_json(text: str) -> BenchmarkSpec:
    raw = json.loads(text)
    kw = dict(raw)
    for key in ("m_values", "eps_values", "engines"):
        if key in kw:
            kw[key] = tuple(kw[key])
    if kw.get("cutoffs") is not None:
        kw["cutoffs"] = tuple((int(m), float(c)) for m, c in kw["cutoffs"])
    return BenchmarkSpec(**kw)


@dataclass
class BenchmarkRow:
    engine: str
    n: int
    m: int
    eps: float
    trial: int
    accuracy: float
    residual: float
    iterations: int
    wall_time_s: float
    converged: bool
    reflected: bool
    status: str = "ok"


@dataclass
class SequenceRow:
    frame_a: str
    frame_b: str
    gap: int
    t_size: int
    engine: str
    accuracy: float
    residual: float
    iterations: int
    wall_time_s: float
    converged: bool
    status: str = "ok"


def run_engine(
    engine: str,
    template: PointPattern,
    scene: PointPattern,
    params: PotentialParams,
    cfg: ConvergenceConfig,
    tree_seed: int = 0,
) -> MatchResult:
    """Dispatch one match to an engine.  bp = max-product on the squared
    cycle; jt = exact junction tree on a seeded 3-tree; oracle = exhaustive
    argmin of the distance-matrix objective."""
    if engine == "bp":
        return match_bp(template, scene, params, cfg)
    if engine == "jt":
        g = build_three_tree(len(template), seed=tree_seed)
        return jt_map(template, scene, build_junction_tree(g), params)
    if engine == "oracle":
        t0 = time.perf_counter()
        assignment, residual = brute_force_objective(template, scene)
        used = np.unique(assignment)
        return MatchResult(
            assignment=assignment,
            tie_sets=tuple((int(s),) for s in assignment),
            residual=residual,
            iterations=1,
            converged=True,
            wall_time=time.perf_counter() - t0,
            collisions=int(len(assignment) - len(used)),
        )
    raise ValueError(f"unknown engine {engine!r}; valid: {VALID_ENGINES}")


def _cell_rows(spec: BenchmarkSpec, mi: int, ei: int, trial: int) -> list:
    m = spec.m_values[mi]
    eps = spec.eps_values[ei]
    seed = np.random.SeedSequence([spec.seed, mi, ei, trial])
    template, scene, truth, info = generate_instance(spec.n, m, eps, seed, with_transform=True)
    params = PotentialParams(
        sigma=spec.sigma, mode=spec.mode, dynamic_range_d=spec.dynamic_range_d
    )
    cfg = ConvergenceConfig(
        mse_cutoff=spec.cutoff_for(m),
        min_iterations=spec.min_iterations,
        max_iterations=spec.max_iterations,
    )

    rows = []
    for engine in spec.engines:
        base = dict(engine=engine, n=spec.n, m=m, eps=eps, trial=trial, reflected=info.reflected)
        try:
            r = run_engine(engine, template, scene, params, cfg, tree_seed=spec.tree_seed)
            rows.append(
                BenchmarkRow(
                    accuracy=float(np.mean(r.assignment == truth)),
                    residual=r.residual,
                    iterations=r.iterations,
                    wall_time_s=r.wall_time,
                    converged=r.converged,
                    status="ok",
                    **base,
                )
            )
        except (ResourceLimitError, DegenerateSizeError) as exc:
            rows.append(
                BenchmarkRow(
                    accuracy=math.nan,
                    residual=math.nan,
                    iterations=0,
                    wall_time_s=math.nan,
                    converged=False,
                    status=type(exc).__name__,
                    **base,
                )
            )
    return rows


def run_benchmark(spec: BenchmarkSpec, workers: int = 1) -> list:
    """All rows of the grid, sorted by (engine, m, eps, trial) so output is
    independent of execution order (trials may run in a process pool)."""
    tasks = [
        (mi, ei, trial)
        for mi in range(len(spec.m_values))
        for ei in range(len(spec.eps_values))
        for trial in range(spec.trials)
    ]
    rows = []
    if workers <= 1:
        for mi, ei, trial in tasks:
            rows.extend(_cell_rows(spec, mi, ei, trial))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk in pool.map(
                _cell_rows,
                [spec] * len(tasks),
                *zip(*tasks),
                chunksize=max(1, len(tasks) // (4 * workers)),
            ):
                rows.extend(chunk)
    rows.sort(key=lambda r: (r.engine, r.n, r.m, r.eps, r.trial))
    return rows


# ---------------------------------------------------------------------------
# CSV emission

_BENCH_FIELDS = [
    "schema_version",
    "engine",
    "n",
    "m",
    "eps",
    "trial",
    "accuracy",
    "residual",
    "iterations",
    "wall_time_s",
    "converged",
    "reflected",
    "status",
]


def _fmt(x, pattern="%.12g") -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return pattern % x
    return str(x)


def rows_to_csv(rows, path, include_timing: bool = True) -> None:
    """One CSV row per BenchmarkRow.  With include_timing=False the
    wall_time_s column is left blank, making the file byte-identical across
    reruns of the same spec and seed."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_BENCH_FIELDS)
        for r in rows:
            w.writerow(
                [
                    SCHEMA_VERSION,
                    r.engine,
                    r.n,
                    r.m,
                    _fmt(r.eps),
                    r.trial,
                    _fmt(r.accuracy),
                    _fmt(r.residual),
                    r.iterations,
                    _fmt(r.wall_time_s, "%.6f") if include_timing else "",
                    _fmt(r.converged),
                    _fmt(r.reflected),
                    r.status,
                ]
            )


def summarize(rows) -> list:
    """Per-cell mean and standard error of accuracy (plus iteration and
    timing means) over the ok-status trials, one dict per (engine, n, m, eps)."""
    cells: dict = {}
    for r in rows:
        cells.setdefault((r.engine, r.n, r.m, r.eps), []).append(r)
    out = []
    for (engine, n, m, eps), cell in sorted(cells.items()):
        ok = [r for r in cell if r.status == "ok"]
        acc = np.array([r.accuracy for r in ok])
        k = len(acc)
        stderr = float(acc.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0
        out.append(
            {
                "engine": engine,
                "n": n,
                "m": m,
                "eps": eps,
                "trials_ok": k,
                "trials_failed": len(cell) - k,
                "mean_accuracy": float(acc.mean()) if k else math.nan,
                "stderr_accuracy": stderr if k else math.nan,
                "mean_iterations": float(np.mean([r.iterations for r in ok])) if k else math.nan,
                "mean_wall_time_s": float(np.mean([r.wall_time_s for r in ok])) if k else math.nan,
                "nonconverged": sum(1 for r in ok if not r.converged),
            }
        )
    return out


_SUMMARY_FIELDS = [
    "schema_version",
    "engine",
    "n",
    "m",
    "eps",
    "trials_ok",
    "trials_failed",
    "mean_accuracy",
    "stderr_accuracy",
    "mean_iterations",
    "mean_wall_time_s",
    "nonconverged",
]


def summary_to_csv(summary, path, include_timing: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_SUMMARY_FIELDS)
        for s in summary:
            w.writerow(
                [
                    SCHEMA_VERSION,
                    s["engine"],
                    s["n"],
                    s["m"],
                    _fmt(s["eps"]),
                    s["trials_ok"],
                    s["trials_failed"],
                    _fmt(s["mean_accuracy"]),
                    _fmt(s["stderr_accuracy"]),
                    _fmt(s["mean_iterations"]),
                    _fmt(s["mean_wall_time_s"], "%.6f") if include_timing else "",
                    s["nonconverged"],
                ]
            )


# ---------------------------------------------------------------------------
# landmark sequence

def run_sequence(
    frames_dir,
    gap: int,
    t_sizes,
    engine: str = "bp",
    sigma: float = SIGMA_PIXEL,
    dynamic_range_d: float = 1000.0,
    mode: str = "gaussian",
    mse_cutoff: float | None = None,
    min_iterations: int = 5,
    max_iterations: int = 100,
    tree_seed: int = 0,
) -> list:
    """Match the first |T| landmarks of each frame into all landmarks of the
    frame `gap` later; ground truth is the identity correspondence of rows.

    Frames are the directory's *.csv files in name order.  An unreadable
    frame contributes a single warning row and the pair is skipped, so row
    count = (valid pairs) x len(t_sizes) + warnings.
    """
    if gap < 0:
        raise ValueError("gap must be >= 0")
    frames = sorted(Path(frames_dir).glob("*.csv"))
    if len(frames) <= gap:
        raise ValueError(
            f"need more than {gap} frames in {frames_dir}, found {len(frames)}"
        )

    rows = []
    for i in range(len(frames) - gap):
        fa, fb = frames[i], frames[i + gap]
        try:
            pa = load_points(fa)
            pb = load_points(fb)
        except (OSError, ValueError) as exc:
            rows.append(
                SequenceRow(
                    frame_a=fa.name,
                    frame_b=fb.name,
                    gap=gap,
                    t_size=0,
                    engine=engine,
                    accuracy=math.nan,
                    residual=math.nan,
                    iterations=0,
                    wall_time_s=math.nan,
                    converged=False,
                    status=f"skipped: {exc}",
                )
            )
            continue
        m = len(pb)
        params = PotentialParams(sigma=sigma, mode=mode, dynamic_range_d=dynamic_range_d)
        cfg = ConvergenceConfig(
            mse_cutoff=default_mse_cutoff(m) if mse_cutoff is None else mse_cutoff,
            min_iterations=min_iterations,
            max_iterations=max_iterations,
        )
        for t in t_sizes:
            base = dict(frame_a=fa.name, frame_b=fb.name, gap=gap, t_size=t, engine=engine)
            if t < 1 or t > len(pa):
                rows.append(
                    SequenceRow(
                        accuracy=math.nan,
                        residual=math.nan,
                        iterations=0,
                        wall_time_s=math.nan,
                        converged=False,
                        status=f"skipped: t_size {t} outside frame with {len(pa)} landmarks",
                        **base,
                    )
                )
                continue
            template = PointPattern(pa.points[:t], label=fa.name)
            try:
                r = run_engine(engine, template, pb, params, cfg, tree_seed=tree_seed)
            except (ResourceLimitError, DegenerateSizeError) as exc:
                rows.append(
                    SequenceRow(
                        accuracy=math.nan,
                        residual=math.nan,
                        iterations=0,
                        wall_time_s=math.nan,
                        converged=False,
                        status=type(exc).__name__,
                        **base,
                    )
                )
                continue
            truth = np.arange(t)
            rows.append(
                SequenceRow(
                    accuracy=float(np.mean(r.assignment == truth)),
                    residual=r.residual,
                    iterations=r.iterations,
                    wall_time_s=r.wall_time,
                    converged=r.converged,
                    status="ok",
                    **base,
                )
            )
    return rows


_SEQ_FIELDS = [
    "schema_version",
    "frame_a",
    "frame_b",
    "gap",
    "t_size",
    "engine",
    "accuracy",
    "residual",
    "iterations",
    "wall_time_s",
    "converged",
    "status",
]


def sequence_to_csv(rows, path, include_timing: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_SEQ_FIELDS)
        for r in rows:
            w.writerow(
                [
                    SCHEMA_VERSION,
                    r.frame_a,
                    r.frame_b,
                    r.gap,
                    r.t_size,
                    r.engine,
                    _fmt(r.accuracy),
                    _fmt(r.residual),
                    r.iterations,
                    _fmt(r.wall_time_s, "%.6f") if include_timing else "",
                    _fmt(r.converged),
                    r.status,
                ]
            )
