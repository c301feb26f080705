import json
import shutil

import numpy as np
import pytest

from conftest import HOUSE_DIR, random_pattern
from ringmatch.bench import (
    DEFAULT_EPS_GRID,
    SCHEMA_VERSION,
    BenchmarkRow,
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
from ringmatch.bp import ConvergenceConfig
from ringmatch.cli import main
from ringmatch.geometry import generate_instance, points_to_json
from ringmatch.potentials import PotentialParams

TINY = BenchmarkSpec(
    n=6,
    m_values=(6, 8),
    eps_values=(0.0, 2 / 256),
    trials=4,
    engines=("bp", "jt"),
    seed=0,
)


def test_default_eps_grid():
    assert DEFAULT_EPS_GRID == (0.0, 1 / 256, 2 / 256, 3 / 256, 4 / 256)


def test_spec_validation():
    with pytest.raises(ValueError, match="trials"):
        BenchmarkSpec(trials=0)
    with pytest.raises(ValueError, match="scene sizes"):
        BenchmarkSpec(n=10, m_values=(8,))
    with pytest.raises(ValueError, match="engines"):
        BenchmarkSpec(engines=("bp", "annealing"))
    with pytest.raises(ValueError, match="seed"):
        BenchmarkSpec(seed=-1)


def test_spec_json_round_trip():
    text = json.dumps(
        {
            "n": 6,
            "m_values": [6, 8],
            "eps_values": [0.0, 0.0078125],
            "trials": 3,
            "engines": ["bp"],
            "cutoffs": [[8, 1e-10]],
        }
    )
    spec = benchmark_spec_from_json(text)
    assert spec.m_values == (6, 8)
    assert spec.cutoff_for(8) == 1e-10
    assert spec.cutoff_for(6) == 1e-8  # default for the uncovered size


def test_run_engine_dispatch_and_rejection():
    t, s, truth = generate_instance(6, 8, 0.0, seed=1)
    params = PotentialParams(mode="delta")
    cfg = ConvergenceConfig.for_scene_size(8)
    for engine in ("bp", "jt", "oracle"):
        r = run_engine(engine, t, s, params, cfg)
        assert np.array_equal(r.assignment, truth), engine
    with pytest.raises(ValueError, match="unknown engine"):
        run_engine("spectral", t, s, params, cfg)


def test_benchmark_rows_sorted_paired_and_deterministic():
    rows = run_benchmark(TINY)
    assert len(rows) == 2 * 2 * 2 * 4
    keys = [(r.engine, r.n, r.m, r.eps, r.trial) for r in rows]
    assert keys == sorted(keys)
    # engines see the same instance: identical per-trial reflected flags
    bp_rows = [r for r in rows if r.engine == "bp"]
    jt_rows = [r for r in rows if r.engine == "jt"]
    assert [r.reflected for r in bp_rows] == [r.reflected for r in jt_rows]
    # identical spec -> identical rows, modulo timing
    again = run_benchmark(TINY)
    for a, b in zip(rows, again):
        assert (a.engine, a.m, a.eps, a.trial, a.accuracy, a.residual) == (
            b.engine, b.m, b.eps, b.trial, b.accuracy, b.residual
        )


def test_benchmark_eps0_is_perfect_for_both_engines():
    rows = run_benchmark(TINY)
    for r in rows:
        if r.eps == 0.0:
            assert r.accuracy == 1.0, (r.engine, r.m, r.trial)


def test_csv_bytes_stable_without_timing(tmp_path):
    rows = run_benchmark(TINY)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    rows_to_csv(rows, p1, include_timing=False)
    rows_to_csv(run_benchmark(TINY), p2, include_timing=False)
    assert p1.read_bytes() == p2.read_bytes()
    header = p1.read_text().splitlines()[0]
    assert header == (
        "schema_version,engine,n,m,eps,trial,accuracy,residual,"
        "iterations,wall_time_s,converged,reflected,status"
    )
    with_timing = tmp_path / "c.csv"
    rows_to_csv(rows, with_timing, include_timing=True)
    cell = with_timing.read_text().splitlines()[1].split(",")
    assert cell[9] != ""  # wall_time_s populated


def test_summarize_moments():
    mk = lambda acc, status="ok": BenchmarkRow(
        engine="bp", n=6, m=6, eps=0.0, trial=0, accuracy=acc, residual=0.0,
        iterations=5, wall_time_s=0.001, converged=True, reflected=False,
        status=status,
    )
    rows = [mk(1.0), mk(0.5), mk(0.75), mk(float("nan"), status="ResourceLimitError")]
    (cell,) = summarize(rows)
    assert cell["trials_ok"] == 3 and cell["trials_failed"] == 1
    assert cell["mean_accuracy"] == pytest.approx(0.75)
    want_se = np.std([1.0, 0.5, 0.75], ddof=1) / np.sqrt(3)
    assert cell["stderr_accuracy"] == pytest.approx(want_se)


def test_summary_csv_written(tmp_path):
    rows = run_benchmark(BenchmarkSpec(n=6, m_values=(6,), eps_values=(0.0,),
                                       trials=2, engines=("bp",)))
    path = tmp_path / "s.csv"
    summary_to_csv(summarize(rows), path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("schema_version,engine,n,m,eps,trials_ok")
    assert len(lines) == 2


def test_failed_cells_become_status_rows():
    # oracle at n=10, m=10 exceeds the enumeration guard -> status row, no crash
    spec = BenchmarkSpec(n=10, m_values=(10,), eps_values=(0.0,), trials=2,
                         engines=("oracle",))
    rows = run_benchmark(spec)
    assert len(rows) == 2
    for r in rows:
        assert r.status == "ResourceLimitError"
        assert np.isnan(r.accuracy)
    (cell,) = summarize(rows)
    assert cell["trials_ok"] == 0 and cell["trials_failed"] == 2


def test_oracle_engine_in_grid():
    spec = BenchmarkSpec(n=5, m_values=(6,), eps_values=(0.0,), trials=3,
                         engines=("bp", "oracle"))
    rows = run_benchmark(spec)
    for r in rows:
        assert r.accuracy == 1.0


# ---------------------------------------------------------------------------
# sequence runner


def test_sequence_gap0_is_exact():
    rows = run_sequence(HOUSE_DIR, gap=0, t_sizes=[20])
    assert len(rows) == 5
    for r in rows:
        assert r.accuracy == 1.0 and r.status == "ok"


def test_sequence_small_gap_tracks_well():
    rows = run_sequence(HOUSE_DIR, gap=1, t_sizes=[20])
    assert len(rows) == 4
    assert np.mean([r.accuracy for r in rows]) > 0.9


def test_sequence_bad_frame_becomes_warning_row(tmp_path):
    for f in HOUSE_DIR.glob("*.csv"):
        shutil.copy(f, tmp_path / f.name)
    (tmp_path / "frame_002.csv").write_text("not,a,number\n")
    rows = run_sequence(tmp_path, gap=1, t_sizes=[15, 20])
    skipped = [r for r in rows if r.status.startswith("skipped")]
    ok = [r for r in rows if r.status == "ok"]
    assert len(skipped) == 2  # frame_002 appears as source and as target
    assert len(ok) == 2 * 2  # two intact pairs x two template sizes


def test_sequence_t_size_overflow_row():
    rows = run_sequence(HOUSE_DIR, gap=0, t_sizes=[31])
    assert all("t_size" in r.status for r in rows)


def test_sequence_needs_enough_frames(tmp_path):
    (tmp_path / "only.csv").write_text("0,0\n1,0\n0,1\n")
    with pytest.raises(ValueError, match="frames"):
        run_sequence(tmp_path, gap=1, t_sizes=[3])
    with pytest.raises(ValueError, match="gap"):
        run_sequence(tmp_path, gap=-1, t_sizes=[3])


def test_sequence_csv(tmp_path):
    rows = run_sequence(HOUSE_DIR, gap=0, t_sizes=[15])
    p = tmp_path / "seq.csv"
    sequence_to_csv(rows, p, include_timing=False)
    lines = p.read_text().splitlines()
    assert lines[0] == (
        "schema_version,frame_a,frame_b,gap,t_size,engine,accuracy,"
        "residual,iterations,wall_time_s,converged,status"
    )
    assert len(lines) == 6
    assert lines[1].split(",")[0] == str(SCHEMA_VERSION)


# ---------------------------------------------------------------------------
# command line


def _write_instance(tmp_path, n=8, m=11, eps=0.0, seed=0):
    t, s, truth = generate_instance(n, m, eps, seed=seed)
    tp = tmp_path / "template.json"
    sp = tmp_path / "scene.json"
    tp.write_text(points_to_json(t))
    sp.write_text(points_to_json(s))
    return tp, sp, truth


def test_cli_match_exact(tmp_path, capsys):
    tp, sp, truth = _write_instance(tmp_path)
    code = main(["match", str(tp), str(sp), "--mode", "delta"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["schema_version"] == SCHEMA_VERSION
    assert payload["engine"] == "bp"
    assert payload["assignment"] == list(truth)
    assert payload["converged"] is True
    assert payload["residual"] < 1e-18
    assert payload["collisions"] == 0


def test_cli_match_out_file(tmp_path, capsys):
    tp, sp, truth = _write_instance(tmp_path)
    out = tmp_path / "result.json"
    code = main(["match", str(tp), str(sp), "--mode", "delta", "--out", str(out)])
    assert code == 0
    assert json.loads(out.read_text())["assignment"] == list(truth)
    assert capsys.readouterr().out == ""


def test_cli_match_small_template_routes_to_oracle(tmp_path, capsys):
    tp, sp, truth = _write_instance(tmp_path, n=4, m=6)
    code = main(["match", str(tp), str(sp), "--mode", "delta"])
    assert code == 0
    captured = capsys.readouterr()
    assert "brute-force" in captured.err
    payload = json.loads(captured.out)
    assert payload["engine"] == "oracle"
    assert payload["assignment"] == list(truth)


def test_cli_match_trace(tmp_path, capsys):
    tp, sp, _ = _write_instance(tmp_path)
    code = main(["match", str(tp), str(sp), "--trace"])
    assert code == 0
    err_lines = capsys.readouterr().err.splitlines()
    assert err_lines[0] == "iteration,clique,mse"
    first = err_lines[1].split(",")
    assert first[0] == "1" and first[1] == "0"
    float(first[2])  # parses


def test_cli_match_nonconvergence_exit_code(tmp_path):
    tp = tmp_path / "t.json"
    sp = tmp_path / "s.json"
    tp.write_text(points_to_json(random_pattern(3, 8)))
    sp.write_text(points_to_json(random_pattern(4, 8)))
    code = main(["match", str(tp), str(sp), "--mse-cutoff", "1e-30",
                 "--max-iters", "8"])
    assert code == 2


def test_cli_match_missing_file(tmp_path, capsys):
    sp = tmp_path / "s.json"
    sp.write_text(points_to_json(random_pattern(1, 6)))
    code = main(["match", str(tmp_path / "absent.json"), str(sp)])
    assert code == 1
    assert "ringmatch:" in capsys.readouterr().err


def test_cli_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["match", "a.json", "b.json", "--engine", "annealing"])
    assert exc.value.code == 1


def test_cli_benchmark(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    code = main([
        "benchmark", "--n", "6", "--m", "6,8", "--eps", "0,0.0078125",
        "--trials", "2", "--engines", "bp,jt", "--out", str(out), "--no-timing",
    ])
    assert code == 0
    assert out.exists()
    summary = tmp_path / "bench_summary.csv"
    assert summary.exists()
    body = out.read_text().splitlines()
    assert len(body) == 1 + 2 * 2 * 2 * 2
    # byte-stable rerun
    again = tmp_path / "bench2.csv"
    main([
        "benchmark", "--n", "6", "--m", "6,8", "--eps", "0,0.0078125",
        "--trials", "2", "--engines", "bp,jt", "--out", str(again), "--no-timing",
    ])
    assert out.read_bytes() == again.read_bytes()


def test_cli_benchmark_spec_file(tmp_path):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({
        "n": 6, "m_values": [6], "eps_values": [0.0], "trials": 2,
        "engines": ["bp"],
    }))
    out = tmp_path / "b.csv"
    assert main(["benchmark", "--spec", str(spec_path), "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 3


def test_cli_benchmark_bad_spec(tmp_path, capsys):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({"n": 10, "m_values": [4]}))
    assert main(["benchmark", "--spec", str(spec_path)]) == 1
    assert "bad benchmark spec" in capsys.readouterr().err


def test_cli_sequence(tmp_path):
    out = tmp_path / "seq.csv"
    code = main(["sequence", str(HOUSE_DIR), "--gap", "0", "--t-sizes", "15,20",
                 "--out", str(out), "--no-timing"])
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 5 * 2
    accs = {line.split(",")[6] for line in lines[1:]}
    assert accs == {"1"}


def test_speedup_ratio_grows_with_scene_size():
    """Five fixed-cost sweeps against one m^4 tree pass: the tree/chain time
    ratio should grow roughly linearly in m, so quadrupling m lands the
    growth factor well inside [2, 8]."""
    from ringmatch.junction import build_junction_tree, jt_map
    from ringmatch.topology import build_three_tree
    from ringmatch.bp import match_bp

    params = PotentialParams(mode="delta")
    jt = build_junction_tree(build_three_tree(10, seed=0))
    inst = {}
    for m in (10, 40):
        t, s, _ = generate_instance(10, m, 0.0, seed=3)
        cfg = ConvergenceConfig.for_scene_size(m)
        res = match_bp(t, s, params=params, cfg=cfg)
        # the premise: immediate convergence, i.e. exactly min_iterations sweeps
        assert res.converged and res.iterations == cfg.min_iterations == 5
        jt_map(t, s, jt, params=params)  # warm
        inst[m] = (t, s, cfg)

    best = {}
    reps = {("bp", 10): 30, ("bp", 40): 4, ("jt", 10): 30, ("jt", 40): 2}
    for _ in range(3):
        for m in (10, 40):
            t, s, cfg = inst[m]
            for _ in range(reps["bp", m]):
                wall = match_bp(t, s, params=params, cfg=cfg).wall_time
                best["bp", m] = min(best.get(("bp", m), np.inf), wall)
            for _ in range(reps["jt", m]):
                wall = jt_map(t, s, jt, params=params).wall_time
                best["jt", m] = min(best.get(("jt", m), np.inf), wall)

    growth = (best["jt", 40] / best["bp", 40]) / (best["jt", 10] / best["bp", 10])
    assert 2.0 <= growth <= 8.0, f"ratio growth {growth:.2f} outside [2, 8]"
