"""Benchmark objectives and evaluation accounting.

All five functions have their global minimum 0; the box ranges are the
standard ones used for this suite at D = 10.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Bounds, as_vector

TWO_PI = 2.0 * np.pi


class BudgetExhausted(RuntimeError):
    """Raised when an objective call would exceed the evaluation budget."""


class EvalCounter:
    """Counts objective evaluations against a fixed budget."""

    def __init__(self, budget: int):
        if int(budget) != budget or budget < 1:
            raise ValueError(f"budget must be a positive integer, got {budget}")
        self.budget = int(budget)
        self.used = 0

    @property
    def remaining(self) -> int:
        return self.budget - self.used

    @property
    def exhausted(self) -> bool:
        return self.used >= self.budget

    def charge(self):
        if self.used >= self.budget:
            raise BudgetExhausted(f"evaluation budget of {self.budget} exhausted")
        self.used += 1

    def __repr__(self):
        return f"EvalCounter(used={self.used}, budget={self.budget})"


def rosenbrock(x):
    x = np.asarray(x, dtype=np.float64)
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (x[:-1] - 1.0) ** 2))


def rastrigin(x):
    x = np.asarray(x, dtype=np.float64)
    return float(10.0 * len(x) + np.sum(x**2 - 10.0 * np.cos(TWO_PI * x)))


def sphere(x):
    x = np.asarray(x, dtype=np.float64)
    return float(np.sum(x**2))


def griewangk(x):
    x = np.asarray(x, dtype=np.float64)
    i = np.arange(1, len(x) + 1)
    return float(-np.prod(np.cos(x / np.sqrt(i))) + np.sum(x**2) / 4000.0 + 1.0)


def ackley(x):
    """Pairwise Ackley over adjacent coordinates; zero at the origin up to float residue."""
    x = np.asarray(x, dtype=np.float64)
    a, b = x[:-1], x[1:]
    # grouped as 20(1 - u) + (e - w) so the origin evaluates to exactly 0
    terms = 20.0 * (1.0 - np.exp(-0.2 * np.sqrt(0.5 * (b**2 + a**2)))) + (
        np.e - np.exp(0.5 * (np.cos(TWO_PI * b) + np.cos(TWO_PI * a)))
    )
    return float(np.sum(terms))


# token -> (callable, symmetric half-range)
_TABLE = {
    "rosenbrock": (rosenbrock, 15.0),
    "rastrigin": (rastrigin, 15.0),
    "sphere": (sphere, 100.0),
    "griewangk": (griewangk, 600.0),
    "ackley": (ackley, 32.0),
}

FUNCTION_IDS = tuple(_TABLE)


@dataclass(frozen=True)
class BenchmarkFunction:
    name: str
    dim: int
    bounds: Bounds
    func: Callable

    @property
    def label(self) -> str:
        return f"f{FUNCTION_IDS.index(self.name) + 1}"

    def __call__(self, x) -> float:
        return self.func(x)


def get_function(name: str, dim: int) -> BenchmarkFunction:
    if name not in _TABLE:
        raise ValueError(f"unknown function {name!r}; choose from {', '.join(FUNCTION_IDS)}")
    if int(dim) != dim or dim < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {dim}")
    func, half = _TABLE[name]
    return BenchmarkFunction(name, int(dim), Bounds(-half, half), func)


def make_suite(dim: int) -> list:
    """The five functions in suite order f1..f5."""
    return [get_function(name, dim) for name in FUNCTION_IDS]


def evaluate(f: BenchmarkFunction, x, counter: EvalCounter) -> float:
    """Evaluate ``f`` at ``x`` and charge one evaluation to ``counter``."""
    x = as_vector(x, f.dim)
    if not f.bounds.contains(x):
        raise ValueError(f"point lies outside [{f.bounds.lower}, {f.bounds.upper}]")
    counter.charge()
    return f.func(x)
