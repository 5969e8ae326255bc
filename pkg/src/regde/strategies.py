"""The ten-member DE strategy ensemble: five mutation rules x {exp, bin} crossover.

Ordinals 1-5 use exponential crossover and 6-10 binomial crossover, with the
mutation rules in the order Best/1, Rand/1, RandToBest/1, Best/2, Rand/2.
Ordinal 7 (Rand/1/Bin) is the classic DE step.

Every generator here is vectorised over (target, strategy) slots; the
single-vector helpers are thin views on the same code path, so one call
with the same stream state yields the same vectors either way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Bounds, DeParams, Population, RngStream, clamp_to_bounds, sample_donor_matrix

BEST_1 = "Best/1"
RAND_1 = "Rand/1"
RAND_TO_BEST_1 = "RandToBest/1"
BEST_2 = "Best/2"
RAND_2 = "Rand/2"
MUTATIONS = (BEST_1, RAND_1, RAND_TO_BEST_1, BEST_2, RAND_2)

DONORS_NEEDED = {BEST_1: 2, RAND_1: 3, RAND_TO_BEST_1: 2, BEST_2: 4, RAND_2: 5}
MAX_DONORS = max(DONORS_NEEDED.values())

EXP = "Exp"
BIN = "Bin"


@dataclass(frozen=True)
class StrategyId:
    ordinal: int
    mutation: str
    crossover: str

    @property
    def name(self) -> str:
        return f"{self.mutation}/{self.crossover}"

    def __str__(self):
        return f"{self.ordinal}:{self.name}"


STRATEGIES = tuple(
    StrategyId(k * len(MUTATIONS) + i + 1, mut, xo)
    for k, xo in enumerate((EXP, BIN))
    for i, mut in enumerate(MUTATIONS)
)
ENSEMBLE = tuple(s.ordinal for s in STRATEGIES)
RAND_1_BIN = 7


def strategy(ordinal: int) -> StrategyId:
    if not 1 <= ordinal <= len(STRATEGIES):
        raise ValueError(f"strategy ordinal must be in 1..{len(STRATEGIES)}, got {ordinal}")
    return STRATEGIES[ordinal - 1]


def mutation_rule(kind: str, target, best, donors, f: float) -> np.ndarray:
    """Mutant vectors from explicit donor vectors.

    ``donors`` has the donor index on its leading axis: ``donors[0]`` is
    x_r1, ``donors[1]`` is x_r2 and so on. ``target`` and ``best`` broadcast
    against a single donor.
    """
    r = donors
    if kind == BEST_1:
        return best + f * (r[0] - r[1])
    if kind == RAND_1:
        return r[0] + f * (r[1] - r[2])
    if kind == RAND_TO_BEST_1:
        return target + f * (best - target) + f * (r[0] - r[1])
    if kind == BEST_2:
        return best + f * (r[0] + r[1] - r[2] - r[3])
    if kind == RAND_2:
        return r[0] + f * (r[1] + r[2] - r[3] - r[4])
    raise ValueError(f"unknown mutation rule {kind!r}")


def binomial_mask(rows: int, dim: int, cr: float, rng: RngStream) -> np.ndarray:
    """Boolean mask of mutant positions; one forced position per row."""
    u = rng.random((rows, dim))
    j_rand = rng.integers(0, dim, size=rows)
    mask = u <= cr
    mask[np.arange(rows), j_rand] = True
    return mask


def circular_block_mask(dim: int, start, length) -> np.ndarray:
    """Mask selecting ``length`` consecutive positions from ``start``, wrapping at ``dim``."""
    start = np.atleast_1d(np.asarray(start))
    length = np.atleast_1d(np.asarray(length))
    offset = (np.arange(dim)[None, :] - start[:, None]) % dim
    return offset < length[:, None]


def exponential_mask(rows: int, dim: int, cr: float, rng: RngStream) -> np.ndarray:
    """Mutant positions for exponential crossover.

    The block starts at a uniform position and grows by one while a fresh
    uniform draw is <= cr, up to the full dimension.
    """
    start = rng.integers(0, dim, size=rows)
    u = rng.random((rows, dim - 1))
    length = 1 + np.cumprod(u <= cr, axis=1).sum(axis=1)
    return circular_block_mask(dim, start, length)


def _check_pair(target, mutant):
    target = np.asarray(target, dtype=np.float64)
    mutant = np.asarray(mutant, dtype=np.float64)
    if target.shape != mutant.shape or target.ndim != 1:
        raise ValueError(f"target and mutant must be equal-length vectors, got {target.shape} and {mutant.shape}")
    return target, mutant


def binomial_crossover(target, mutant, cr: float, rng: RngStream) -> np.ndarray:
    target, mutant = _check_pair(target, mutant)
    mask = binomial_mask(1, len(target), cr, rng)[0]
    return np.where(mask, mutant, target)


def exponential_crossover(target, mutant, cr: float, rng: RngStream) -> np.ndarray:
    target, mutant = _check_pair(target, mutant)
    mask = exponential_mask(1, len(target), cr, rng)[0]
    return np.where(mask, mutant, target)


def _best_vector(population: Population) -> np.ndarray:
    return population.positions[population.best_index()]


def mutate(strategy_id: StrategyId, population: Population, target_index: int, f: float,
           rng: RngStream) -> np.ndarray:
    """Mutant for one target; donors are drawn fresh and exclude the target."""
    need = DONORS_NEEDED[strategy_id.mutation]
    idx = sample_donor_matrix(need, [target_index], population.size, rng)[0]
    x = population.positions
    return mutation_rule(strategy_id.mutation, x[target_index], _best_vector(population), x[idx], f)


def trial_vectors(population: Population, targets, ordinals, params: DeParams, bounds: Bounds,
                  rng: RngStream, best=None) -> np.ndarray:
    """Clamped trial vectors for every (target, strategy) pair.

    Returns an array shaped ``(len(targets), len(ordinals), D)``. Each slot
    gets its own donor draw and crossover draw; none is evaluated. ``best``
    defaults to the population's lowest-fitness member.
    """
    x = population.positions
    n, dim = x.shape
    targets = np.atleast_1d(np.asarray(targets, dtype=np.intp))
    ordinals = [int(o) for o in ordinals]
    chosen = [strategy(o) for o in ordinals]
    m, s = len(targets), len(chosen)
    if best is None:
        best = _best_vector(population)

    slot_targets = np.repeat(targets, s)
    donors = sample_donor_matrix(MAX_DONORS, slot_targets, n, rng).reshape(m, s, MAX_DONORS)
    bin_mask = binomial_mask(m * s, dim, params.cr, rng).reshape(m, s, dim)
    exp_mask = exponential_mask(m * s, dim, params.cr, rng).reshape(m, s, dim)

    base = x[targets]
    out = np.empty((m, s, dim))
    for k, sid in enumerate(chosen):
        need = DONORS_NEEDED[sid.mutation]
        donor_vecs = np.moveaxis(x[donors[:, k, :need]], 1, 0)
        mutant = mutation_rule(sid.mutation, base, best, donor_vecs, params.f)
        mask = exp_mask[:, k] if sid.crossover == EXP else bin_mask[:, k]
        out[:, k] = np.where(mask, mutant, base)
    return clamp_to_bounds(out, bounds)


def apply_strategy(strategy_id: StrategyId, population: Population, target_index: int,
                   params: DeParams, bounds: Bounds, rng: RngStream) -> np.ndarray:
    """Mutation, the strategy's crossover, then clamping; not evaluated."""
    if isinstance(strategy_id, StrategyId):
        strategy_id = strategy_id.ordinal
    return trial_vectors(population, [target_index], [strategy_id], params, bounds, rng)[0, 0]


def create_test_set(population: Population, target_index: int, params: DeParams, bounds: Bounds,
                    rng: RngStream) -> np.ndarray:
    """One trial per ensemble strategy, rows in ordinal order, shape ``(10, D)``."""
    return trial_vectors(population, [target_index], ENSEMBLE, params, bounds, rng)[0]


def create_validation_vector(population: Population, target_index: int, params: DeParams,
                             bounds: Bounds, rng: RngStream) -> np.ndarray:
    """The Rand/1/Bin trial that the regression models learn to reproduce."""
    return apply_strategy(RAND_1_BIN, population, target_index, params, bounds, rng)
