"""Command line entry point: ``regde`` / ``python -m regde``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .core import DeParams
from .engine import ALGORITHMS
from .harness import FLOAT_FORMAT, ExperimentPlan, execute_plan, replay, write_outputs
from .problems import FUNCTION_IDS
from .regression import ARRANGEMENTS, KINDS, RegressorSpec

log = logging.getLogger("regde")

DEFAULTS = {
    "algorithm": ",".join(ALGORITHMS),
    "function": ",".join(FUNCTION_IDS),
    "dim": 10,
    "np": 10,
    "f": 0.5,
    "cr": 0.9,
    "tmax": 1000,
    "budget": 10_000,
    "runs": 25,
    "seed": 0,
    "estimators": None,
    "jobs": 1,
    "out": "runs",
    "arrangement": "trials",
}
INT_KEYS = {"dim", "np", "tmax", "budget", "runs", "seed", "estimators", "jobs"}
FLOAT_KEYS = {"f", "cr"}
# per-kind hyperparameters accepted as "<kind>.<name> = value" in a config file
SPEC_FIELDS = {
    "n_estimators": int,
    "learning_rate": float,
    "max_depth": int,
    "min_samples_split": int,
    "max_features": int,
    "ridge_alpha": float,
    "tie_break": str,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="regde",
        description="Differential evolution with regression-blended strategy ensembles.",
    )
    p.add_argument("--algorithm", help=f"comma-separated tokens from {{{','.join(ALGORITHMS)}}} (default: all)")
    p.add_argument("--function", help=f"comma-separated tokens from {{{','.join(FUNCTION_IDS)}}} (default: all)")
    p.add_argument("--dim", type=int, help="problem dimension (default: 10)")
    p.add_argument("--np", type=int, help="population size (default: 10)")
    p.add_argument("--f", type=float, help="scale factor F (default: 0.5)")
    p.add_argument("--cr", type=float, help="crossover rate CR (default: 0.9)")
    p.add_argument("--tmax", type=int, help="maximum generations (default: 1000)")
    p.add_argument("--budget", type=int, help="objective evaluations per run (default: 10000)")
    p.add_argument("--runs", type=int, help="repetitions per cell (default: 25)")
    p.add_argument("--seed", type=int, help="base seed (default: 0)")
    p.add_argument("--estimators", type=int, help="trees per RF/EXT model (default: 40)")
    p.add_argument("--jobs", type=int, help="worker processes (default: 1)")
    p.add_argument("--out", help="output directory (default: runs)")
    p.add_argument("--arrangement", choices=ARRANGEMENTS,
                   help="regression query rows: trial vectors (default, needs dim 10) or dimension rows")
    p.add_argument("--replay-seed", type=int, metavar="SEED",
                   help="re-run one cell with this recorded seed and print its best fitness")
    p.add_argument("--config", type=Path, help="flat key = value file; flags override it")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key = key.strip().replace("-", "_").lstrip("_")
        values[key] = value.strip()
    return values


def _convert(key: str, value, kind):
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ValueError(f"{key}: expected {kind.__name__}, got {value!r}") from None


def _tokens(key: str, value: str, allowed) -> tuple:
    items = tuple(t.strip() for t in str(value).split(",") if t.strip())
    if items == ("all",):
        return tuple(allowed)
    for t in items:
        if t not in allowed:
            raise ValueError(f"{key}: unknown token {t!r}; choose from {', '.join(allowed)}")
    if not items:
        raise ValueError(f"{key}: empty selection")
    return items


def _check(key: str, ok: bool, message: str):
    if not ok:
        raise ValueError(f"{key}: {message}")


def parse_config(argv=None):
    """Merge defaults, the optional config file and flags into an ExperimentPlan.

    Returns ``(plan, args)``; ``args`` carries the non-plan flags.
    """
    args = build_parser().parse_args(argv)
    settings = dict(DEFAULTS)
    overrides = {}
    if args.config is not None:
        for key, value in read_config(args.config).items():
            kind, dot, name = key.partition(".")
            if dot:
                _check(key, kind in KINDS, f"unknown regressor kind; choose from {', '.join(KINDS)}")
                _check(key, name in SPEC_FIELDS, f"unknown hyperparameter; choose from {', '.join(SPEC_FIELDS)}")
                overrides.setdefault(kind, {})[name] = _convert(key, value, SPEC_FIELDS[name])
            elif key in settings:
                settings[key] = value
            else:
                raise ValueError(f"{key}: unknown config key")
    for key in settings:
        flag = getattr(args, key)
        if flag is not None:
            settings[key] = flag
    for key in INT_KEYS:
        if settings[key] is not None:
            settings[key] = _convert(key, settings[key], int)
    for key in FLOAT_KEYS:
        settings[key] = _convert(key, settings[key], float)

    s = settings
    _check("f", 0.1 <= s["f"] <= 1.0, f"must lie in [0.1, 1.0], got {s['f']}")
    _check("cr", 0.0 <= s["cr"] <= 1.0, f"must lie in [0.0, 1.0], got {s['cr']}")
    _check("np", s["np"] >= 6, f"must be >= 6, got {s['np']}")
    _check("dim", s["dim"] >= 2, f"must be >= 2, got {s['dim']}")
    _check("tmax", s["tmax"] >= 1, f"must be >= 1, got {s['tmax']}")
    _check("budget", s["budget"] >= s["np"], f"must cover the initial population ({s['np']}), got {s['budget']}")
    _check("runs", s["runs"] >= 1, f"must be >= 1, got {s['runs']}")
    _check("jobs", s["jobs"] >= 1, f"must be >= 1, got {s['jobs']}")
    _check("seed", 0 <= s["seed"] < 2**64, f"must be an unsigned 64-bit integer, got {s['seed']}")
    _check("arrangement", s["arrangement"] in ARRANGEMENTS, f"choose from {', '.join(ARRANGEMENTS)}")
    if s["estimators"] is not None:
        _check("estimators", s["estimators"] >= 1, f"must be >= 1, got {s['estimators']}")
        for kind in ("rf", "ext"):
            overrides.setdefault(kind, {}).setdefault("n_estimators", s["estimators"])
    for kind, values in overrides.items():
        try:
            RegressorSpec.default(kind, **values)
        except ValueError as exc:
            raise ValueError(f"{kind}: {exc}") from None

    algorithms = _tokens("algorithm", s["algorithm"], ALGORITHMS)
    _check("arrangement", s["arrangement"] != "trials" or s["dim"] == 10 or algorithms == ("de",),
           f"'trials' needs dim 10, got {s['dim']}; use --arrangement rows")
    plan = ExperimentPlan(
        algorithms=algorithms,
        functions=_tokens("function", s["function"], FUNCTION_IDS),
        dimension=s["dim"],
        repetitions=s["runs"],
        base_seed=s["seed"],
        de_params=DeParams(f=s["f"], cr=s["cr"], pop_size=s["np"], dim=s["dim"], max_generations=s["tmax"]),
        budget=s["budget"],
        regressor_overrides=overrides,
        arrangement=s["arrangement"],
        output_dir=Path(s["out"]),
        jobs=s["jobs"],
    )
    return plan, args


def main(argv=None) -> int:
    try:
        plan, args = parse_config(argv)
    except (ValueError, OSError) as exc:
        print(f"regde: error: {exc}", file=sys.stderr)
        return 2
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(message)s")

    if args.replay_seed is not None:
        try:
            rec = replay(plan, args.replay_seed)
        except (ValueError, RuntimeError) as exc:
            print(f"regde: error: {exc}", file=sys.stderr)
            return 2
        print(f"{rec.algorithm} {rec.function} seed={rec.seed} best_fitness={FLOAT_FORMAT % rec.best_fitness} "
              f"evaluations={rec.evaluations}")
        return 0

    print(f"running {plan.n_cells} runs into {plan.output_dir}/", file=sys.stderr)
    records, failures = execute_plan(plan, stream_to=plan.output_dir / "runs.csv")
    if not records:
        print("regde: error: every run failed", file=sys.stderr)
        for f in failures:
            print(f"  {f.algorithm}/{f.function} run {f.run_index}: {f.error}", file=sys.stderr)
        return 1
    problems = write_outputs(records, plan, failures)
    for line in problems:
        print(f"warning: {line}", file=sys.stderr)
    print(f"wrote runs.csv, summary.csv, friedman.txt to {plan.output_dir}/", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
