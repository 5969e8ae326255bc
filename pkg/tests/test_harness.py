import csv
from pathlib import Path

import numpy as np
import pytest

import regde.harness as harness
from regde.cli import main, parse_config, read_config
from regde.core import DeParams
from regde.engine import ALGORITHMS
from regde.harness import (
    RUNS_HEADER,
    SUMMARY_HEADER,
    ExperimentPlan,
    RunFailure,
    cell_seed,
    execute_plan,
    read_runs,
    replay,
    stable_hash,
    write_outputs,
)
from regde.problems import FUNCTION_IDS
from regde.stats import summarize_runs


def _small_plan(tmp_path, algorithms=("de", "de+lm"), functions=("sphere", "ackley"), runs=3, jobs=1):
    return ExperimentPlan(algorithms=algorithms, functions=functions, repetitions=runs,
                          de_params=DeParams(max_generations=15), budget=10_000,
                          output_dir=tmp_path / "out", jobs=jobs)


def test_defaults_reproduce_paper_setup():
    plan, _ = parse_config([])
    assert plan.algorithms == ALGORITHMS and plan.functions == FUNCTION_IDS
    assert plan.repetitions == 25 and plan.budget == 10_000 and plan.dimension == 10
    p = plan.de_params
    assert (p.f, p.cr, p.pop_size, p.dim, p.max_generations) == (0.5, 0.9, 10, 10, 1000)
    assert plan.n_cells == 750


def test_single_cell_filter():
    plan, _ = parse_config(["--algorithm", "de+rf", "--function", "sphere", "--runs", "5"])
    assert plan.algorithms == ("de+rf",) and plan.functions == ("sphere",)
    assert len(list(plan.cells())) == 5


@pytest.mark.parametrize("argv, key", [
    (["--cr", "1.5"], "cr"),
    (["--f", "0.01"], "f"),
    (["--np", "4"], "np"),
    (["--runs", "0"], "runs"),
    (["--algorithm", "de+svm"], "algorithm"),
    (["--function", "schwefel"], "function"),
    (["--dim", "5"], "arrangement"),
])
def test_range_errors_name_the_key(argv, key, capsys):
    with pytest.raises(ValueError, match=f"^{key}"):
        parse_config(argv)
    assert main(argv) == 2
    assert key in capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# trimmed experiment\nalgorithm = de,de+gb\nruns = 4\ncr = 0.7\n"
                   "gb.max_depth = 2\nrf.n_estimators = 10   # per-kind override\n"
                   "dt.tie_break = lowest\n")
    assert read_config(cfg)["gb.max_depth"] == "2"
    plan, _ = parse_config(["--config", str(cfg), "--runs", "2"])
    assert plan.algorithms == ("de", "de+gb")
    assert plan.repetitions == 2
    assert plan.de_params.cr == 0.7
    assert plan.regressor_for("de+gb").max_depth == 2
    assert plan.regressor_for("de+rf").n_estimators == 10
    assert plan.regressor_for("de+dt").tie_break == "lowest"
    assert plan.regressor_for("de+rf").tie_break == "random"


def test_config_file_errors(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    with pytest.raises(ValueError, match="colour"):
        parse_config(["--config", str(cfg)])
    cfg.write_text("svm.C = 1\n")
    with pytest.raises(ValueError, match="svm"):
        parse_config(["--config", str(cfg)])
    cfg.write_text("lm.ridge_alpha = -2\n")
    with pytest.raises(ValueError, match="lm"):
        parse_config(["--config", str(cfg)])


def test_estimators_flag_sets_forests_only():
    plan, _ = parse_config(["--estimators", "7"])
    assert plan.regressor_for("de+rf").n_estimators == 7
    assert plan.regressor_for("de+ext").n_estimators == 7
    assert plan.regressor_for("de+gb").n_estimators == 100


def test_seed_derivation():
    assert stable_hash("de", "sphere", 0) == stable_hash("de", "sphere", 0)
    assert cell_seed(0, "de", "sphere", 0) == stable_hash("de", "sphere", 0)
    assert cell_seed(5, "de", "sphere", 0) == 5 ^ stable_hash("de", "sphere", 0)
    seeds = {cell_seed(0, a, f, r) for a in ALGORITHMS for f in FUNCTION_IDS for r in range(25)}
    assert len(seeds) == 750
    # adding an algorithm leaves the other cells' seeds untouched
    small = ExperimentPlan(algorithms=("de",), functions=("sphere",), repetitions=3)
    big = ExperimentPlan(algorithms=("de", "de+rf"), functions=("sphere",), repetitions=3)
    assert list(small.cells()) == list(big.cells())[:3]


def test_execute_plan_counts_and_determinism(tmp_path):
    plan = _small_plan(tmp_path)
    records, failures = execute_plan(plan, stream_to=tmp_path / "stream.csv")
    assert not failures and len(records) == plan.n_cells == 12
    assert all(r.evaluations == 160 for r in records)
    again, _ = execute_plan(plan)
    strip = [r.csv_row()[:-1] for r in records]
    assert strip == [r.csv_row()[:-1] for r in again]
    assert [r.best_fitness for r in read_runs(tmp_path / "stream.csv")] == [r.best_fitness for r in records]


def test_parallel_matches_serial(tmp_path):
    serial, _ = execute_plan(_small_plan(tmp_path, runs=2))
    parallel, _ = execute_plan(_small_plan(tmp_path, runs=2, jobs=2))
    assert [r.csv_row()[:-1] for r in serial] == [r.csv_row()[:-1] for r in parallel]


def test_failures_are_isolated(tmp_path, monkeypatch):
    real = harness.run

    def flaky(config):
        if config.algorithm == "de+lm" and config.function.name == "ackley":
            raise RuntimeError("boom")
        return real(config)

    monkeypatch.setattr(harness, "run", flaky)
    plan = _small_plan(tmp_path)
    records, failures = execute_plan(plan)
    assert len(records) == 9 and len(failures) == 3
    assert all(isinstance(f, RunFailure) and "boom" in f.error for f in failures)
    problems = write_outputs(records, plan, failures)
    assert any("boom" in p for p in problems)
    assert any("rank analysis skipped" in p for p in problems)


def test_write_outputs(tmp_path):
    plan = _small_plan(tmp_path)
    records, _ = execute_plan(plan)
    assert write_outputs(records, plan) == []
    out = plan.output_dir
    for name in ("runs.csv", "summary.csv", "friedman.txt", "cd_diagram.svg", "cd_diagram.txt"):
        assert (out / name).exists()
    with open(out / "runs.csv") as fh:
        assert fh.readline().strip() == ",".join(RUNS_HEADER)
    with open(out / "summary.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == SUMMARY_HEADER
    assert len(rows) - 1 == len(plan.algorithms) * len(plan.functions)

    # summary recomputed from runs.csv matches byte for byte
    reread = read_runs(out / "runs.csv")
    for row in rows[1:]:
        values = [r.best_fitness for r in reread if (r.algorithm, r.function) == (row[0], row[1])]
        stats = summarize_runs(values).as_tuple()
        assert row[4:] == ["%.16e" % v for v in stats]
    assert "chi-square" in (out / "friedman.txt").read_text()


def test_single_record_summary_is_reported(tmp_path):
    plan = _small_plan(tmp_path, algorithms=("de",), functions=("sphere",), runs=1)
    records, _ = execute_plan(plan)
    problems = write_outputs(records, plan)
    assert any("de/sphere" in p for p in problems)
    row = (plan.output_dir / "summary.csv").read_text().splitlines()[1].split(",")
    assert row[3] == "1" and row[4] == "nan"


def test_write_outputs_needs_records(tmp_path):
    with pytest.raises(ValueError):
        write_outputs([], _small_plan(tmp_path))


def test_replay_reproduces_record(tmp_path):
    plan = _small_plan(tmp_path, algorithms=("de+lm",), functions=("ackley",), runs=2)
    records, _ = execute_plan(plan)
    for rec in records:
        assert replay(plan, rec.seed).best_fitness == rec.best_fitness
    with pytest.raises(ValueError):
        replay(_small_plan(tmp_path), 1)


def test_cli_end_to_end(tmp_path, capsys):
    out = tmp_path / "cli"
    argv = ["--algorithm", "de,de+dt", "--function", "sphere,rastrigin", "--runs", "2",
            "--tmax", "10", "--out", str(out)]
    assert main(argv) == 0
    rows = (out / "runs.csv").read_text().splitlines()
    assert len(rows) == 1 + 8
    first = rows[1].split(",")
    capsys.readouterr()
    assert main(["--algorithm", first[0], "--function", first[1], "--tmax", "10",
                 "--replay-seed", first[4]]) == 0
    printed = capsys.readouterr().out
    assert f"best_fitness={first[5]}" in printed
    assert np.isfinite(float(first[5]))
    assert Path(out / "cd_diagram.svg").read_text().startswith("<svg")
