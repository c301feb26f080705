"""Command line front end.

Subcommands: `match` (two point files -> assignment JSON), `benchmark`
(synthetic noise grid -> CSV + summary CSV), `sequence` (landmark frames ->
CSV).  Exit codes: 0 success, 1 bad input or usage, 2 the run finished
without converging (the result is still printed).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import (
    DEFAULT_EPS_GRID,
    SCHEMA_VERSION,
    BenchmarkSpec,
    benchmark_spec_from_json,
    rows_to_csv,
    run_benchmark,
    run_engine,
    run_sequence,
    sequence_to_csv,
    summarize,
    summary_to_csv,
)
from .bp import ConvergenceConfig, default_mse_cutoff, match_bp
from .geometry import load_points
from .potentials import SIGMA_PIXEL, SIGMA_SYNTHETIC, PotentialParams
from .topology import DegenerateSizeError, ResourceLimitError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NONCONVERGED = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; here 2 means non-convergence, so
    usage problems exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> tuple:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _float_list(text: str) -> tuple:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _add_engine_flags(p, default_sigma: float):
    p.add_argument("--engine", choices=("bp", "jt", "oracle"), default="bp")
    p.add_argument("--mode", choices=("gaussian", "delta"), default="gaussian")
    p.add_argument("--sigma", type=float, default=default_sigma)
    p.add_argument("--dynamic-range", type=float, default=1000.0, dest="dynamic_range")
    p.add_argument("--mse-cutoff", type=float, default=None, dest="mse_cutoff",
                   help="belief-change cutoff (default 1e-8, 1e-9 for m >= 30)")
    p.add_argument("--min-iters", type=int, default=5, dest="min_iters")
    p.add_argument("--max-iters", type=int, default=100, dest="max_iters")
    p.add_argument("--seed", type=int, default=0,
                   help="benchmark master seed / 3-tree attachment seed")
    p.add_argument("--out", type=Path, default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="ringmatch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("match",
                       help="match a template point file into a scene point file")
    p.add_argument("template", type=Path)
    p.add_argument("scene", type=Path)
    _add_engine_flags(p, SIGMA_SYNTHETIC)
    p.add_argument("--delta-tol", type=float, default=None, dest="delta_tol")
    p.add_argument("--schedule", choices=("synchronous", "sequential"), default="synchronous")
    p.add_argument("--trace", action="store_true",
                   help="stream per-iteration clique MSE rows to stderr (bp only)")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("benchmark",
                       help="run the synthetic noise grid")
    _add_engine_flags(p, SIGMA_SYNTHETIC)
    p.add_argument("--spec", type=Path, default=None, help="JSON BenchmarkSpec file")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--m", type=_int_list, default=(10, 20, 30, 40), dest="m_values")
    p.add_argument("--eps", type=_float_list, default=DEFAULT_EPS_GRID, dest="eps_values")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--engines", type=lambda s: tuple(s.split(",")), default=("bp", "jt"))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-timing", action="store_true", dest="no_timing",
                   help="blank the wall_time_s column so reruns are byte-identical")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("sequence",
                       help="match landmark frames separated by a baseline gap")
    p.add_argument("frames_dir", type=Path)
    _add_engine_flags(p, SIGMA_PIXEL)
    p.add_argument("--gap", type=int, default=1)
    p.add_argument("--t-sizes", type=_int_list, default=tuple(range(15, 31, 5)),
                   dest="t_sizes")
    p.add_argument("--no-timing", action="store_true", dest="no_timing")
    p.set_defaults(func=cmd_sequence)
    return parser


def _params_from(args) -> PotentialParams:
    return PotentialParams(
        sigma=args.sigma,
        mode=args.mode,
        delta_tol=getattr(args, "delta_tol", None),
        dynamic_range_d=args.dynamic_range,
    )


def _cfg_from(args, m: int) -> ConvergenceConfig:
    return ConvergenceConfig(
        mse_cutoff=args.mse_cutoff if args.mse_cutoff is not None else default_mse_cutoff(m),
        min_iterations=args.min_iters,
        max_iterations=args.max_iters,
    )


def cmd_match(args) -> int:
    try:
        template = load_points(args.template, label="template")
        scene = load_points(args.scene, label="scene")
    except (OSError, ValueError) as exc:
        print(f"ringmatch: {exc}", file=sys.stderr)
        return EXIT_ERROR

    engine = args.engine
    if engine == "bp" and len(template) < 5:
        print(
            f"ringmatch: no squared cycle exists for n={len(template)} < 5; "
            "routing to the brute-force oracle",
            file=sys.stderr,
        )
        engine = "oracle"

    params = _params_from(args)
    cfg = _cfg_from(args, len(scene))
    trace = None
    try:
        if engine == "bp" and args.trace:
            result, trace = match_bp(template, scene, params, cfg,
                                     schedule=args.schedule, collect_trace=True)
        elif engine == "bp":
            result = match_bp(template, scene, params, cfg, schedule=args.schedule)
        else:
            result = run_engine(engine, template, scene, params, cfg, tree_seed=args.seed)
    except (ResourceLimitError, DegenerateSizeError, ValueError) as exc:
        print(f"ringmatch: {exc}", file=sys.stderr)
        return EXIT_ERROR

    if trace is not None:
        print("iteration,clique,mse", file=sys.stderr)
        for it, row in enumerate(trace["mse"], start=1):
            for ci, v in enumerate(row):
                print(f"{it},{ci},{v:.3e}", file=sys.stderr)

    payload = {
        "schema_version": SCHEMA_VERSION,
        "engine": engine,
        "n": len(template),
        "m": len(scene),
        "assignment": [int(x) for x in result.assignment],
        "tie_sets": [list(t) for t in result.tie_sets],
        "residual": float(result.residual),
        "iterations": int(result.iterations),
        "converged": bool(result.converged),
        "wall_time_s": float(result.wall_time),
        "collisions": int(result.collisions),
    }
    text = json.dumps(payload, indent=2)
    if args.out is not None:
        args.out.write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


def cmd_benchmark(args) -> int:
    try:
        if args.spec is not None:
            spec = benchmark_spec_from_json(args.spec.read_text())
        else:
            spec = BenchmarkSpec(
                n=args.n,
                m_values=args.m_values,
                eps_values=args.eps_values,
                trials=args.trials,
                engines=args.engines,
                sigma=args.sigma,
                dynamic_range_d=args.dynamic_range,
                cutoffs=None if args.mse_cutoff is None
                else tuple((m, args.mse_cutoff) for m in args.m_values),
                seed=args.seed,
                mode=args.mode,
                min_iterations=args.min_iters,
                max_iterations=args.max_iters,
            )
    except (OSError, ValueError, TypeError, KeyError) as exc:
        print(f"ringmatch: bad benchmark spec: {exc}", file=sys.stderr)
        return EXIT_ERROR

    rows = run_benchmark(spec, workers=args.workers)
    out = args.out if args.out is not None else Path("benchmark.csv")
    include_timing = not args.no_timing
    rows_to_csv(rows, out, include_timing=include_timing)
    summary_path = out.with_name(out.stem + "_summary" + out.suffix)
    summary_to_csv(summarize(rows), summary_path, include_timing=include_timing)
    failed = sum(1 for r in rows if r.status != "ok")
    print(
        f"ringmatch: {len(rows)} rows -> {out} (summary -> {summary_path})"
        + (f"; {failed} rows failed" if failed else ""),
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_sequence(args) -> int:
    try:
        rows = run_sequence(
            args.frames_dir,
            gap=args.gap,
            t_sizes=args.t_sizes,
            engine=args.engine,
            sigma=args.sigma,
            dynamic_range_d=args.dynamic_range,
            mode=args.mode,
            mse_cutoff=args.mse_cutoff,
            min_iterations=args.min_iters,
            max_iterations=args.max_iters,
            tree_seed=args.seed,
        )
    except (OSError, ValueError) as exc:
        print(f"ringmatch: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out = args.out if args.out is not None else Path("sequence.csv")
    sequence_to_csv(rows, out, include_timing=not args.no_timing)
    skipped = sum(1 for r in rows if r.status != "ok")
    print(
        f"ringmatch: {len(rows)} rows -> {out}"
        + (f"; {skipped} skipped/failed" if skipped else ""),
        file=sys.stderr,
    )
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
