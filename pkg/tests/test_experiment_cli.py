import math
import subprocess
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
import yaml

from zovr.cli import main
from zovr.data_io import read_trace
from zovr.experiment import (
    OUTPUT_DIR_ENV,
    ConfigError,
    ExperimentConfig,
    build_problem,
    load_config,
    parse_config,
    queries_to_reach,
    resolve_params,
    run_experiment,
    summarize,
    value_at_budget,
)
from zovr.optimizers import RunTrace, TraceRow

ROOT = Path(__file__).resolve().parent.parent
SMALL = {
    "problem": {"n": 30, "d": 4, "data_seed": 3},
    "defaults": {"eta": 0.5, "q": 4, "K": 60, "s2": 4, "beta": 1e-4, "delta": 1e-4},
    "algorithms": ["zo-spider-coord", {"name": "zo-sgd", "eta_over_d": 0.8}],
    "seeds": [0, 1, 2],
    "query_budget": 6000,
}


def _write_config(tmp_path, raw, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return path


def _tree(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_two_algorithms_three_seeds_file_count(tmp_path):
    cfg = parse_config(SMALL)
    result, traces = run_experiment(cfg, output_dir=tmp_path / "out")
    files = sorted(p.name for p in (tmp_path / "out" / "traces").iterdir())
    assert len(files) == 6 and len(traces) == 6
    assert "zo-sgd_seed2.csv" in files
    assert (tmp_path / "out" / "summary.csv").exists()
    summary = (tmp_path / "out" / "summary.csv").read_text().splitlines()
    assert len(summary) == 3
    assert read_trace(tmp_path / "out" / "traces" / "zo-sgd_seed0.csv").rows == traces[("zo-sgd", 0)].rows
    assert result.output_dir == tmp_path / "out"


def test_rerun_is_byte_identical(tmp_path):
    cfg = parse_config(SMALL)
    run_experiment(cfg, output_dir=tmp_path / "a")
    run_experiment(cfg, output_dir=tmp_path / "b")
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")


def test_worker_pool_matches_sequential(tmp_path):
    cfg = parse_config(SMALL)
    run_experiment(cfg, output_dir=tmp_path / "seq")
    run_experiment(replace(cfg, workers=2), output_dir=tmp_path / "par")
    assert _tree(tmp_path / "seq") == _tree(tmp_path / "par")


def test_output_dir_precedence(tmp_path, monkeypatch):
    raw = dict(SMALL, seeds=[0], output_dir=str(tmp_path / "from_config"))
    cfg = parse_config(raw)
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "from_env"))
    result, _ = run_experiment(cfg)
    assert result.output_dir == tmp_path / "from_env"
    result, _ = run_experiment(cfg, output_dir=tmp_path / "from_arg")
    assert result.output_dir == tmp_path / "from_arg"
    monkeypatch.delenv(OUTPUT_DIR_ENV)
    result, _ = run_experiment(cfg)
    assert result.output_dir == tmp_path / "from_config"


def test_budget_respected_in_experiment():
    cfg = parse_config(SMALL)
    _, traces = run_experiment(cfg, write=False)
    for trace in traces.values():
        assert trace.total_queries <= 6000 + 4 * 4 * 4 + 2 * 4 * 30


def test_selector_and_overrides_resolve():
    raw = dict(SMALL, algorithms=[{"name": "zo-spider-coord", "selector": "cor3", "K": 100, "s2": 3}])
    cfg = parse_config(raw)
    obj = build_problem(cfg.problem)
    hp = resolve_params(cfg, cfg.algorithms[0], obj, seed=5)
    assert (hp.K, hp.q, hp.s1, hp.s2, hp.seed) == (100, 6, 30, 3, 5)
    assert hp.eta == pytest.approx(1 / (4 * obj.metadata.smoothness_L))


def test_eta_over_d_and_null_s1():
    raw = dict(SMALL, defaults=dict(SMALL["defaults"], s1=None), algorithms=[{"name": "zo-sgd", "eta_over_d": 0.8}])
    cfg = parse_config(raw)
    hp = resolve_params(cfg, cfg.algorithms[0], build_problem(cfg.problem), 0)
    assert hp.eta == pytest.approx(0.2)
    assert hp.s1 == 30


def test_libsvm_problem_relative_path(tmp_path):
    (tmp_path / "d.txt").write_text("+1 1:0.5 2:1\n-1 1:-1 2:0.2\n+1 2:-0.4\n-1 1:0.3\n")
    raw = dict(SMALL, problem={"kind": "libsvm", "path": "d.txt"}, defaults=dict(SMALL["defaults"], q=2, s2=1), seeds=[0])
    cfg = load_config(_write_config(tmp_path, raw))
    obj = build_problem(cfg.problem)
    assert (obj.n, obj.d) == (4, 2)
    result, _ = run_experiment(cfg, output_dir=tmp_path / "out")
    assert len(result.summaries) == 2


@pytest.mark.parametrize(
    "patch",
    [
        {"algorithms": []},
        {"algorithms": ["zo-magic"]},
        {"seeds": []},
        {"seeds": [-1]},
        {"query_budget": 0},
        {"bogus_key": 1},
        {"problem": {"kind": "csv"}},
        {"problem": {"kind": "libsvm"}},
        {"defaults": {"eta": 0.5, "eta_over_d": 0.8, "q": 4, "K": 60}},
        {"algorithms": [{"name": "zo-sgd", "selector": "cor9"}]},
        {"defaults": {"eta": "fast"}},
        {"target": {"kind": "median"}},
    ],
)
def test_invalid_configs_raise(patch):
    with pytest.raises(ConfigError):
        cfg = parse_config(dict(SMALL, **patch))
        obj = build_problem(cfg.problem)
        for algo in cfg.algorithms:
            resolve_params(cfg, algo, obj, 0)


def test_load_config_errors(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("algorithms: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    empty = tmp_path / "empty.yaml"
    empty.write_text("")
    with pytest.raises(ConfigError):
        load_config(empty)


def test_shipped_configs_parse():
    for name in ("benchmark.yaml", "quick.yaml"):
        cfg = load_config(ROOT / "configs" / name)
        assert isinstance(cfg, ExperimentConfig)
    bench = load_config(ROOT / "configs" / "benchmark.yaml")
    assert bench.query_budget == 2_000_000 and len(bench.seeds) == 10


# -- summary helpers -----------------------------------------------------------


def _trace(pairs):
    return RunTrace(rows=[TraceRow(i, q, f, g) for i, (q, f, g) in enumerate(pairs)])


def test_value_at_budget_is_step_function():
    t = _trace([(0, 1.0, 4.0), (10, 0.5, 2.0), (20, 0.25, 1.0)])
    assert value_at_budget(t, 0) == 1.0
    assert value_at_budget(t, 15) == 0.5
    assert value_at_budget(t, 100, "grad_norm_sq") == 1.0


def test_queries_to_reach():
    t = _trace([(0, 1.0, 4.0), (10, 0.5, 2.0), (20, 0.25, 1.0)])
    assert queries_to_reach(t, 0.5) == 10
    assert queries_to_reach(t, 1.5, "grad_norm_sq") == 20
    assert math.isinf(queries_to_reach(t, 0.1))


def test_summary_invariant_to_seed_order():
    cfg = parse_config(SMALL)
    _, traces = run_experiment(cfg, write=False)
    a = summarize(cfg, traces)
    b = summarize(replace(cfg, seeds=tuple(reversed(cfg.seeds))), dict(reversed(list(traces.items()))))
    assert a == b


def test_benchmark_config_ranks_ours_above_sgd():
    # the shipped benchmark config with a shorter budget and three seeds; the
    # gradient-norm target is hit well inside it by the variance-reduced methods
    cfg = replace(load_config(ROOT / "configs" / "benchmark.yaml"), query_budget=200_000, seeds=(0, 1, 2))
    result, _ = run_experiment(cfg, write=False)
    rank = {s.algorithm: s.rank for s in result.summaries}
    assert rank["zo-spider-coord"] < rank["zo-sgd"]
    assert rank["zo-svrg-coord-rand"] < rank["zo-sgd"]


# -- command line --------------------------------------------------------------


def test_cli_run(tmp_path, capsys):
    path = _write_config(tmp_path, SMALL)
    assert main(["run", str(path), "--output-dir", str(tmp_path / "out")]) == 0
    out = capsys.readouterr().out
    assert "zo-spider-coord" in out and "zo-sgd" in out
    assert len(list((tmp_path / "out" / "traces").iterdir())) == 6


def test_cli_run_invalid_config_exits_nonzero(tmp_path, capsys):
    path = _write_config(tmp_path, dict(SMALL, seeds=[]))
    assert main(["run", str(path)]) == 2
    assert "seeds" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2


def test_cli_params(capsys):
    assert main(["params", "cor3", "--n", "100", "--d", "4", "--K", "400", "--L", "1"]) == 0
    lines = dict(line.split(None, 1) for line in capsys.readouterr().out.splitlines())
    assert lines["eta"] == "0.25" and lines["q"] == "10" and lines["s2"] == "10" and lines["s1"] == "100"
    assert float(lines["delta"]) == 0.025


def test_cli_params_rejects_bad_values(capsys):
    assert main(["params", "cor1", "--n", "0", "--d", "4", "--K", "400", "--L", "1"]) == 2


def test_cli_verify_estimators(capsys):
    assert main(["verify", "estimators"]) == 0
    out = capsys.readouterr().out
    assert "coordinate bias bound" in out
    assert "FAIL" not in out


def test_cli_verify_pl_reports_fit(capsys):
    assert main(["verify", "pl"]) == 0
    out = capsys.readouterr().out
    assert "slope" in out and "R^2" in out


def test_cli_verify_failure_exit_code(monkeypatch, capsys):
    from zovr import cli
    from zovr.verify import CheckResult

    monkeypatch.setattr(cli, "run_suite", lambda name: [CheckResult("x", False, "forced")])
    assert main(["verify", "prox"]) == 1
    assert "FAIL  x: forced" in capsys.readouterr().out


def test_cli_unknown_suite():
    with pytest.raises(SystemExit) as info:
        main(["verify", "everything"])
    assert info.value.code != 0


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "zovr", "params", "cor1", "--n", "1000", "--d", "4", "--K", "5000", "--L", "1"], capture_output=True, text=True, check=True)
    assert "s2        400" in out.stdout
