import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regde.core import (
    Bounds,
    DeParams,
    Population,
    RngStream,
    clamp_to_bounds,
    init_population,
    sample_distinct_indices,
)


def test_init_population_within_bounds():
    params = DeParams(pop_size=10, dim=10)
    pop = init_population(params, Bounds(-100, 100), RngStream(3))
    assert pop.positions.shape == (10, 10)
    assert np.all(pop.positions >= -100) and np.all(pop.positions <= 100)
    assert pop.generation == 0
    assert not pop.evaluated


def test_init_population_deterministic():
    params = DeParams()
    a = init_population(params, Bounds(-15, 15), RngStream(42))
    b = init_population(params, Bounds(-15, 15), RngStream(42))
    assert a.positions.tobytes() == b.positions.tobytes()


def test_small_population_rejected():
    with pytest.raises(ValueError, match="pop_size"):
        DeParams(pop_size=4)


@pytest.mark.parametrize("kwargs", [dict(f=0.05), dict(f=1.5), dict(cr=-0.1), dict(cr=1.01),
                                    dict(dim=0), dict(max_generations=0)])
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        DeParams(**kwargs)


@pytest.mark.parametrize("lower, upper", [(1, 1), (2, -2), (0, np.inf)])
def test_invalid_bounds(lower, upper):
    with pytest.raises(ValueError):
        Bounds(lower, upper)


def test_clamp_examples():
    b = Bounds(-100, 100)
    np.testing.assert_array_equal(clamp_to_bounds([150, -150, 0], b), [100, -100, 0])
    v = np.array([1.5, -99.0, 100.0])
    np.testing.assert_array_equal(clamp_to_bounds(v, b), v)
    np.testing.assert_array_equal(clamp_to_bounds([-600.0001], Bounds(-600, 600)), [-600])


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20))
def test_clamp_idempotent(values):
    b = Bounds(-32, 32)
    once = clamp_to_bounds(values, b)
    np.testing.assert_array_equal(clamp_to_bounds(once, b), once)
    assert b.contains(once)


def test_sample_distinct_examples():
    idx = sample_distinct_indices(5, 0, 10, RngStream(1))
    assert len(set(idx.tolist())) == 5 and 0 not in idx
    assert sorted(sample_distinct_indices(3, 2, 4, RngStream(2)).tolist()) == [0, 1, 3]
    with pytest.raises(ValueError):
        sample_distinct_indices(5, 0, 5, RngStream(3))


def test_sample_distinct_many_trials():
    rng = RngStream(7)
    for trial in range(10_000):
        exclude = trial % 10
        idx = sample_distinct_indices(5, exclude, 10, rng)
        assert len(set(idx.tolist())) == 5
        assert exclude not in idx
        assert idx.min() >= 0 and idx.max() < 10


@settings(max_examples=50)
@given(st.integers(0, 2**64 - 1))
def test_rng_determinism(seed):
    a, b = RngStream(seed), RngStream(seed)
    assert a.random(8).tobytes() == b.random(8).tobytes()
    assert np.array_equal(a.integers(0, 10, 8), b.integers(0, 10, 8))
    u = RngStream(seed).random(1000)
    assert np.all((u >= 0) & (u < 1))


def test_rng_rejects_bad_seed():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(2**64)


def test_population_best_and_members():
    pop = Population(np.arange(12.0).reshape(6, 2), fitness=[5, 3, 3, 8, 9, 4])
    assert pop.best_index() == 1
    assert pop.best().fitness == 3
    assert len(pop.members) == 6 and pop.members[0].fitness == 5
    with pytest.raises(ValueError):
        Population(np.zeros((6, 2))).best_index()
