"""Optimisation loops: classic DE/rand/1/bin and regression-blended ensemble DE.

Both loops replace the population synchronously: trials for a generation are
compared against the generation-start population and the survivors are
swapped in together. The best member used by Best/* and RandToBest/*
strategies is fixed at the start of each generation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import DeParams, Individual, Population, RngStream, init_population
from .problems import BenchmarkFunction, EvalCounter, evaluate
from .regression import ARRANGEMENTS, RegressionError, RegressorSpec, build_regression_vector
from .strategies import ENSEMBLE, RAND_1_BIN, trial_vectors

logger = logging.getLogger(__name__)

ALGORITHMS = ("de", "de+rf", "de+ext", "de+gb", "de+dt", "de+lm")


@dataclass(frozen=True)
class RunConfig:
    params: DeParams
    function: BenchmarkFunction
    algorithm: str = "de"
    regressor: Optional[RegressorSpec] = None
    seed: int = 0
    budget: int = 10_000
    arrangement: str = "trials"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if self.function.dim != self.params.dim:
            raise ValueError(f"function dimension {self.function.dim} != params.dim {self.params.dim}")
        if self.budget < self.params.pop_size:
            raise ValueError(f"budget {self.budget} cannot cover the initial population of {self.params.pop_size}")
        if self.arrangement not in ARRANGEMENTS:
            raise ValueError(f"unknown arrangement {self.arrangement!r}; choose from {', '.join(ARRANGEMENTS)}")
        if self.algorithm != "de" and self.arrangement == "trials" and self.params.dim != len(ENSEMBLE):
            raise ValueError(f"arrangement 'trials' needs dim == {len(ENSEMBLE)}; use 'rows' for dim {self.params.dim}")
        if self.algorithm == "de":
            if self.regressor is not None:
                raise ValueError("classic DE takes no regressor")
        else:
            kind = self.algorithm.split("+", 1)[1]
            if self.regressor is None:
                object.__setattr__(self, "regressor", RegressorSpec.default(kind))
            elif self.regressor.kind != kind:
                raise ValueError(f"algorithm {self.algorithm} needs a {kind!r} regressor, got {self.regressor.kind!r}")


@dataclass
class RunResult:
    best_fitness: float
    best_position: np.ndarray
    evaluations_used: int
    generations: int
    per_generation_best: np.ndarray = field(repr=False)
    fallbacks: int = 0


def select(candidate: Individual, trial: Individual) -> Individual:
    """Keep the trial when it is no worse than the candidate."""
    if candidate.fitness is None or trial.fitness is None:
        raise ValueError("selection needs evaluated individuals")
    return trial if trial.fitness <= candidate.fitness else candidate


def _classic_trials(pop, config, rng):
    targets = np.arange(pop.size)
    return trial_vectors(pop, targets, [RAND_1_BIN], config.params, config.function.bounds, rng)[:, 0]


class _RegressionTrials:
    """Per-generation regression vectors; counts fallbacks to the validation vector."""

    slots = tuple(ENSEMBLE) + (RAND_1_BIN,)

    def __init__(self):
        self.fallbacks = 0

    def __call__(self, pop, config, rng):
        bounds = config.function.bounds
        targets = np.arange(pop.size)
        block = trial_vectors(pop, targets, self.slots, config.params, bounds, rng)
        out = np.empty((pop.size, pop.dim))
        for i in targets:
            test_set, validation = block[i, :-1], block[i, -1]
            try:
                out[i] = build_regression_vector(test_set, validation, config.regressor, bounds, rng,
                                                 config.arrangement)
            except (RegressionError, np.linalg.LinAlgError) as exc:
                self.fallbacks += 1
                logger.debug("generation %d member %d: %s; using validation vector", pop.generation, i, exc)
                out[i] = validation
        return out


def _optimise(config: RunConfig, rng: RngStream, make_trials) -> RunResult:
    func, params = config.function, config.params
    counter = EvalCounter(config.budget)
    pop = init_population(params, func.bounds, rng)
    pop.fitness = np.array([evaluate(func, x, counter) for x in pop.positions])
    trace = [float(pop.fitness.min())]
    generation = 0
    while generation < params.max_generations and not counter.exhausted:
        trials = make_trials(pop, config, rng)
        positions = pop.positions.copy()
        fitness = pop.fitness.copy()
        for i in range(pop.size):
            if counter.exhausted:
                break
            trial_fitness = evaluate(func, trials[i], counter)
            if trial_fitness <= pop.fitness[i]:
                positions[i] = trials[i]
                fitness[i] = trial_fitness
        generation += 1
        pop = Population(positions, fitness, generation)
        trace.append(float(fitness.min()))
    best = pop.best_index()
    return RunResult(
        best_fitness=float(pop.fitness[best]),
        best_position=pop.positions[best].copy(),
        evaluations_used=counter.used,
        generations=generation,
        per_generation_best=np.array(trace),
    )


def run_classic_de(config: RunConfig, rng: RngStream) -> RunResult:
    if config.algorithm != "de":
        raise ValueError(f"run_classic_de needs algorithm 'de', got {config.algorithm!r}")
    return _optimise(config, rng, _classic_trials)


def run_regression_de(config: RunConfig, rng: RngStream) -> RunResult:
    """Ensemble DE where each member competes against one regression vector per generation."""
    if config.algorithm == "de":
        raise ValueError("run_regression_de needs a regression algorithm")
    make_trials = _RegressionTrials()
    result = _optimise(config, rng, make_trials)
    result.fallbacks = make_trials.fallbacks
    if make_trials.fallbacks:
        logger.info("%s on %s: %d regression fits fell back to the validation vector",
                    config.algorithm, config.function.name, make_trials.fallbacks)
    return result


def run(config: RunConfig, rng: Optional[RngStream] = None) -> RunResult:
    """Run ``config`` with a fresh stream seeded from ``config.seed`` unless one is given."""
    rng = RngStream(config.seed) if rng is None else rng
    if config.algorithm == "de":
        return run_classic_de(config, rng)
    return run_regression_de(config, rng)
