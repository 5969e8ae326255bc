"""Experiment plans, parallel execution and CSV/report output."""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .core import DeParams
from .engine import ALGORITHMS, RunConfig, run
from .problems import FUNCTION_IDS, get_function
from .regression import ARRANGEMENTS, KINDS, RegressorSpec
from .stats import (
    BONFERRONI_DUNN_Q,
    ResultsMatrix,
    SummaryStats,
    format_friedman_report,
    friedman_test,
    render_cd_diagram,
    summarize_runs,
)

logger = logging.getLogger(__name__)

RUNS_HEADER = ("algorithm", "function", "dimension", "run", "seed", "best_fitness", "evaluations", "wall_time_ms")
SUMMARY_HEADER = ("algorithm", "function", "dimension", "runs") + SummaryStats.FIELDS
FLOAT_FORMAT = "%.16e"


def stable_hash(algorithm: str, function: str, run_index: int) -> int:
    """64-bit hash of a cell, stable across processes and Python versions."""
    key = f"{algorithm}|{function}|{run_index}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def cell_seed(base_seed: int, algorithm: str, function: str, run_index: int) -> int:
    return (int(base_seed) ^ stable_hash(algorithm, function, run_index)) & 0xFFFF_FFFF_FFFF_FFFF


@dataclass(frozen=True)
class ExperimentPlan:
    algorithms: tuple = ALGORITHMS
    functions: tuple = FUNCTION_IDS
    dimension: int = 10
    repetitions: int = 25
    base_seed: int = 0
    de_params: DeParams = field(default_factory=DeParams)
    budget: int = 10_000
    regressor_overrides: dict = field(default_factory=dict)
    arrangement: str = "trials"
    output_dir: Path = Path("runs")
    jobs: int = 1

    def __post_init__(self):
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"algorithm: unknown token {a!r}; choose from {', '.join(ALGORITHMS)}")
        for f in self.functions:
            if f not in FUNCTION_IDS:
                raise ValueError(f"function: unknown token {f!r}; choose from {', '.join(FUNCTION_IDS)}")
        if not self.algorithms or not self.functions:
            raise ValueError("algorithm/function: the plan selects no cells")
        if self.repetitions < 1:
            raise ValueError(f"runs: must be >= 1, got {self.repetitions}")
        if self.jobs < 1:
            raise ValueError(f"jobs: must be >= 1, got {self.jobs}")
        if self.de_params.dim != self.dimension:
            raise ValueError(f"dim: plan dimension {self.dimension} != params dim {self.de_params.dim}")
        if self.arrangement not in ARRANGEMENTS:
            raise ValueError(f"arrangement: unknown token {self.arrangement!r}; choose from {', '.join(ARRANGEMENTS)}")
        for kind in self.regressor_overrides:
            if kind not in KINDS:
                raise ValueError(f"{kind}: unknown regressor kind; choose from {', '.join(KINDS)}")
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "functions", tuple(self.functions))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        # builds every spec once so bad overrides fail at plan time
        for a in self.algorithms:
            self.regressor_for(a)

    def regressor_for(self, algorithm: str) -> Optional[RegressorSpec]:
        if algorithm == "de":
            return None
        kind = algorithm.split("+", 1)[1]
        return RegressorSpec.default(kind, **self.regressor_overrides.get(kind, {}))

    def cells(self):
        """(algorithm, function, run_index, seed) in plan order."""
        for a in self.algorithms:
            for f in self.functions:
                for r in range(self.repetitions):
                    yield a, f, r, cell_seed(self.base_seed, a, f, r)

    @property
    def n_cells(self) -> int:
        return len(self.algorithms) * len(self.functions) * self.repetitions

    def run_config(self, algorithm: str, function: str, seed: int) -> RunConfig:
        return RunConfig(
            params=self.de_params,
            function=get_function(function, self.dimension),
            algorithm=algorithm,
            regressor=self.regressor_for(algorithm),
            seed=seed,
            budget=self.budget,
            arrangement=self.arrangement,
        )


@dataclass(frozen=True)
class RunRecord:
    algorithm: str
    function: str
    dimension: int
    run_index: int
    seed: int
    best_fitness: float
    evaluations: int
    wall_time_ms: int

    def csv_row(self) -> list:
        return [self.algorithm, self.function, self.dimension, self.run_index, self.seed,
                FLOAT_FORMAT % self.best_fitness, self.evaluations, self.wall_time_ms]


@dataclass(frozen=True)
class RunFailure:
    algorithm: str
    function: str
    run_index: int
    seed: int
    error: str


def _execute_cell(task):
    plan, (algorithm, function, run_index, seed) = task
    start = time.perf_counter()
    try:
        result = run(plan.run_config(algorithm, function, seed))
        if not math.isfinite(result.best_fitness):
            raise FloatingPointError(f"non-finite best fitness {result.best_fitness}")
    except Exception as exc:  # isolate every failure to its own cell
        return RunFailure(algorithm, function, run_index, seed, f"{type(exc).__name__}: {exc}")
    elapsed = int(round((time.perf_counter() - start) * 1000))
    return RunRecord(algorithm, function, plan.dimension, run_index, seed,
                     result.best_fitness, result.evaluations_used, elapsed)


def iter_plan(plan: ExperimentPlan) -> Iterator:
    """Yield a RunRecord or RunFailure per cell, in plan order."""
    tasks = ((plan, cell) for cell in plan.cells())
    if plan.jobs == 1:
        yield from map(_execute_cell, tasks)
        return
    with ProcessPoolExecutor(max_workers=plan.jobs) as pool:
        yield from pool.map(_execute_cell, tasks, chunksize=1)


def execute_plan(plan: ExperimentPlan, stream_to: Optional[Path] = None):
    """Run every cell; returns ``(records, failures)``.

    When ``stream_to`` is given, each record is appended to that CSV as soon as
    it is available so a long experiment leaves partial results behind.
    """
    records, failures = [], []
    writer = handle = None
    if stream_to is not None:
        Path(stream_to).parent.mkdir(parents=True, exist_ok=True)
        handle = open(stream_to, "w", newline="")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(RUNS_HEADER)
    try:
        for done, item in enumerate(iter_plan(plan), 1):
            if isinstance(item, RunFailure):
                failures.append(item)
                logger.warning("%s/%s run %d (seed %d) failed: %s",
                               item.algorithm, item.function, item.run_index, item.seed, item.error)
                continue
            records.append(item)
            if writer is not None:
                writer.writerow(item.csv_row())
                handle.flush()
            logger.info("[%d/%d] %s %s run %d: %.6e", done, plan.n_cells, item.algorithm,
                        item.function, item.run_index, item.best_fitness)
    finally:
        if handle is not None:
            handle.close()
    return records, failures


def read_runs(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RUNS_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [
            RunRecord(row["algorithm"], row["function"], int(row["dimension"]), int(row["run"]),
                      int(row["seed"]), float(row["best_fitness"]), int(row["evaluations"]),
                      int(row["wall_time_ms"]))
            for row in reader
        ]


def _group(records):
    cells = {}
    for rec in records:
        cells.setdefault((rec.algorithm, rec.function), []).append(rec.best_fitness)
    return cells


def summary_rows(records, plan: ExperimentPlan):
    """One row per (algorithm, function) of the plan plus the cells that could not be summarised."""
    cells = _group(records)
    rows, problems = [], []
    for a in plan.algorithms:
        for f in plan.functions:
            values = cells.get((a, f), [])
            try:
                stats = summarize_runs(values).as_tuple()
            except ValueError as exc:
                problems.append(f"{a}/{f}: {exc}")
                stats = (math.nan,) * len(SummaryStats.FIELDS)
            rows.append([a, f, plan.dimension, len(values)] + [FLOAT_FORMAT % v for v in stats])
    return rows, problems


def mean_matrix(records, plan: ExperimentPlan) -> Optional[ResultsMatrix]:
    cells = _group(records)
    if not all((a, f) in cells for a in plan.algorithms for f in plan.functions):
        return None
    means = [[float(np.mean(cells[a, f])) for f in plan.functions] for a in plan.algorithms]
    return ResultsMatrix(plan.algorithms, plan.functions, np.array(means))


def write_outputs(records, plan: ExperimentPlan, failures=(), alpha: float = 0.05) -> list:
    """Write runs.csv, summary.csv, friedman.txt and the CD diagram.

    Returns the list of non-fatal problems (cells that could not be
    summarised, a skipped rank analysis, failed runs).
    """
    if not records:
        raise ValueError("no records to write")
    out = plan.output_dir
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "runs.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RUNS_HEADER)
        writer.writerows(rec.csv_row() for rec in records)

    rows, problems = summary_rows(records, plan)
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        writer.writerows(rows)

    problems += [f"{f.algorithm}/{f.function} run {f.run_index} seed {f.seed}: {f.error}" for f in failures]
    matrix = mean_matrix(records, plan)
    k = len(plan.algorithms)
    max_k = 1 + len(BONFERRONI_DUNN_Q[alpha])
    if matrix is None or not 2 <= k <= max_k:
        reason = "missing cells" if matrix is None else f"needs 2..{max_k} algorithms, plan has {k}"
        problems.append(f"rank analysis skipped: {reason}")
        (out / "friedman.txt").write_text(f"rank analysis skipped: {reason}\n")
    else:
        outcome = friedman_test(matrix, alpha)
        (out / "friedman.txt").write_text(format_friedman_report(outcome, matrix))
        svg, txt = render_cd_diagram(outcome)
        (out / "cd_diagram.svg").write_text(svg)
        (out / "cd_diagram.txt").write_text(txt)
    if problems:
        (out / "problems.txt").write_text("\n".join(problems) + "\n")
    return problems


def replay(plan: ExperimentPlan, seed: int) -> RunRecord:
    """Re-run the plan's single (algorithm, function) cell with an explicit seed."""
    if len(plan.algorithms) != 1 or len(plan.functions) != 1:
        raise ValueError("replay-seed: select exactly one --algorithm and one --function")
    item = _execute_cell((plan, (plan.algorithms[0], plan.functions[0], -1, seed)))
    if isinstance(item, RunFailure):
        raise RuntimeError(item.error)
    return item

