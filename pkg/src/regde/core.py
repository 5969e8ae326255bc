"""Value types, box bounds and the seeded random stream shared by every module.

Candidate solutions are plain 1-D ``float64`` arrays; a population stores its
positions as an ``(NP, D)`` matrix next to an ``(NP,)`` fitness vector where
``nan`` marks an individual that has not been evaluated yet.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

MIN_POPULATION = 6


class RngStream:
    """Single-owner source of randomness.

    Wraps :class:`numpy.random.Generator` on the PCG64 bit generator, so a
    given 64-bit seed always yields the same sequence of draws. Never share
    one stream between concurrently running tasks.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def random(self, size=None):
        """Uniform reals in [0, 1)."""
        return self._gen.random(size)

    def integers(self, low, high=None, size=None):
        """Uniform integers in [low, high)."""
        return self._gen.integers(low, high, size=size)

    def seeds(self, n: int) -> np.ndarray:
        """Draw ``n`` uint64 seeds for the kernels' private generators."""
        return self._gen.integers(0, 2**64, size=n, dtype=np.uint64, endpoint=False)

    def __repr__(self):
        return f"RngStream(seed={self.seed})"


@dataclass(frozen=True)
class Bounds:
    """Box ``[lower, upper]`` applied identically to every dimension."""

    lower: float
    upper: float

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise ValueError("bounds must be finite")
        if not self.lower < self.upper:
            raise ValueError(f"lower bound {self.lower} must be below upper bound {self.upper}")

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all((x >= self.lower) & (x <= self.upper)))


@dataclass(frozen=True)
class DeParams:
    """Control parameters of differential evolution.

    Parameters
    ----------
    f : float
        Amplification factor, within [0.1, 1.0].
    cr : float
        Crossover rate, within [0.0, 1.0].
    pop_size : int
        Population size NP. Rand/2 strategies need five donors besides the
        target, hence NP >= 6.
    dim : int
        Problem dimension D.
    max_generations : int
        Generation cap T_max.
    """

    f: float = 0.5
    cr: float = 0.9
    pop_size: int = 10
    dim: int = 10
    max_generations: int = 1000

    def __post_init__(self):
        if not 0.1 <= self.f <= 1.0:
            raise ValueError(f"f must lie in [0.1, 1.0], got {self.f}")
        if not 0.0 <= self.cr <= 1.0:
            raise ValueError(f"cr must lie in [0.0, 1.0], got {self.cr}")
        if int(self.pop_size) != self.pop_size or self.pop_size < MIN_POPULATION:
            raise ValueError(f"pop_size must be an integer >= {MIN_POPULATION}, got {self.pop_size}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if int(self.max_generations) != self.max_generations or self.max_generations < 1:
            raise ValueError(f"max_generations must be a positive integer, got {self.max_generations}")


@dataclass(frozen=True)
class Individual:
    position: np.ndarray
    fitness: Optional[float] = None

    @property
    def evaluated(self) -> bool:
        return self.fitness is not None


@dataclass
class Population:
    """NP positions with their (possibly missing) fitness values."""

    positions: np.ndarray
    fitness: np.ndarray = field(default=None)
    generation: int = 0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2:
            raise ValueError("positions must be an (NP, D) matrix")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions must be finite")
        if self.fitness is None:
            self.fitness = np.full(len(self.positions), np.nan)
        else:
            self.fitness = np.asarray(self.fitness, dtype=np.float64)
            if self.fitness.shape != (len(self.positions),):
                raise ValueError("fitness must hold one value per member")

    def __len__(self):
        return len(self.positions)

    @property
    def size(self) -> int:
        return len(self.positions)

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def evaluated(self) -> bool:
        return not np.any(np.isnan(self.fitness))

    @property
    def members(self) -> list:
        return [
            Individual(p.copy(), None if np.isnan(fv) else float(fv))
            for p, fv in zip(self.positions, self.fitness)
        ]

    def best_index(self) -> int:
        """Index of the lowest fitness; the first one wins ties."""
        if not self.evaluated:
            raise ValueError("population has unevaluated members")
        return int(np.argmin(self.fitness))

    def best(self) -> Individual:
        i = self.best_index()
        return Individual(self.positions[i].copy(), float(self.fitness[i]))


def as_vector(x, dim: Optional[int] = None) -> np.ndarray:
    """Validate ``x`` as a finite 1-D real vector, optionally of length ``dim``."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if dim is not None and len(v) != dim:
        raise ValueError(f"expected a vector of length {dim}, got {len(v)}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector components must be finite")
    return v


def init_population(params: DeParams, bounds: Bounds, rng: RngStream) -> Population:
    """Draw NP points uniformly from the box; fitness is left unevaluated."""
    if params.pop_size < MIN_POPULATION:
        raise ValueError(f"pop_size must be >= {MIN_POPULATION}")
    span = bounds.upper - bounds.lower
    positions = bounds.lower + span * rng.random((params.pop_size, params.dim))
    return Population(clamp_to_bounds(positions, bounds), generation=0)


def clamp_to_bounds(v, bounds: Bounds) -> np.ndarray:
    """Project every component onto ``[lower, upper]``."""
    return np.clip(np.asarray(v, dtype=np.float64), bounds.lower, bounds.upper)


def sample_donor_matrix(count: int, excludes, n: int, rng: RngStream) -> np.ndarray:
    """Distinct donor indices for several targets at once.

    Row ``r`` holds ``count`` pairwise-distinct indices from ``[0, n)``,
    none equal to ``excludes[r]``, in uniformly random order.
    """
    excludes = np.atleast_1d(np.asarray(excludes, dtype=np.intp))
    if count < 0 or count + 1 > n:
        raise ValueError(f"cannot draw {count} distinct donors besides the target from {n} members")
    if np.any((excludes < 0) | (excludes >= n)):
        raise ValueError("excluded index out of range")
    keys = rng.random((len(excludes), n))
    keys[np.arange(len(excludes)), excludes] = np.inf
    return np.argsort(keys, axis=1, kind="stable")[:, :count]


def sample_distinct_indices(count: int, exclude: int, n: int, rng: RngStream) -> np.ndarray:
    """``count`` distinct indices from ``[0, n)``, none equal to ``exclude``."""
    return sample_donor_matrix(count, [exclude], n, rng)[0]
