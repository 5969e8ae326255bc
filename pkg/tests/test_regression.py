import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regde import _pykernels
from regde._backend import compiled_kernels
from regde.core import Bounds, RngStream
from regde.regression import (
    RegressionDataset,
    RegressionError,
    RegressorSpec,
    build_regression_vector,
    fit_cart,
    fit_extra_trees,
    fit_gradient_boosting,
    fit_random_forest,
    fit_regressor,
    fit_ridge,
    predict_tree,
)

KERNELS = [pytest.param(_pykernels, id="python")]
if compiled_kernels is not None:
    KERNELS.append(pytest.param(compiled_kernels, id="compiled"))


def _data(n=10, p=10, seed=0):
    rng = np.random.default_rng(seed)
    return RegressionDataset(rng.normal(size=(n, p)), rng.normal(size=n))


# CART ------------------------------------------------------------------

def test_cart_two_points():
    model = fit_cart(RegressionDataset([[0.0], [1.0]], [1.0, 3.0]))
    assert predict_tree(model, [0.0]) == 1.0
    assert predict_tree(model, [1.0]) == 3.0


def test_cart_constant_targets_single_leaf():
    model = fit_cart(RegressionDataset([[0.0], [1.0], [2.0]], [4.0, 4.0, 4.0]))
    assert model.n_nodes[0] == 1
    assert predict_tree(model, [17.0]) == 4.0


def test_cart_first_split_threshold():
    model = fit_cart(RegressionDataset([[0.0], [1.0], [2.0]], [0.0, 0.0, 6.0]))
    assert model.feature[0, 0] == 0
    assert 1.0 <= model.threshold[0, 0] < 2.0


def _sse_split(x, y, t):
    left, right = y[x <= t], y[x > t]
    return ((left - left.mean()) ** 2).sum() + ((right - right.mean()) ** 2).sum()


def test_root_split_matches_brute_force():
    # oracle: exhaustive search over features and midpoints for the smallest child SSE
    rng = np.random.default_rng(3)
    for _ in range(100):
        X = rng.integers(0, 6, size=(12, 4)).astype(float)
        y = rng.normal(size=12)
        best = (np.inf, None, None)
        for f in range(X.shape[1]):
            vals = np.unique(X[:, f])
            for a, b in zip(vals[:-1], vals[1:]):
                sse = _sse_split(X[:, f], y, (a + b) / 2)
                if sse < best[0] - 1e-12:
                    best = (sse, f, (a + b) / 2)
        model = fit_cart(RegressionDataset(X, y), max_depth=1)
        if best[1] is None:
            assert model.n_nodes[0] == 1
            continue
        f, t = model.feature[0, 0], model.threshold[0, 0]
        assert _sse_split(X[:, f], y, t) == pytest.approx(best[0], abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 30), st.integers(1, 6), st.integers(0, 2**32))
def test_cart_memorises_distinct_rows(n, p, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = rng.normal(size=n)
    model = fit_cart(RegressionDataset(X, y))
    np.testing.assert_array_equal(model.predict(X), y)


def test_cart_depth_limit():
    data = _data(n=40, p=3, seed=1)
    model = fit_cart(data, max_depth=2)
    assert model.n_nodes[0] <= 7


def test_cart_random_subset_needs_rng():
    with pytest.raises(ValueError, match="rng"):
        fit_cart(_data(), max_features=3)
    with pytest.raises(ValueError, match="rng"):
        fit_cart(_data(), tie_break="random")
    with pytest.raises(ValueError):
        fit_cart(_data(), tie_break="highest")
    with pytest.raises(ValueError):
        fit_cart(_data(), split_rule="median")


def _twin_columns():
    # columns 0 and 2 are identical, so every split on one ties with the other
    rng = np.random.default_rng(11)
    X = rng.normal(size=(12, 3))
    X[:, 2] = X[:, 0]
    X[:, 1] = 0.0
    return RegressionDataset(X, rng.normal(size=12))


def test_cart_lowest_tie_break_prefers_first_feature():
    model = fit_cart(_twin_columns())
    used = model.feature[model.feature >= 0]
    assert used.size > 0 and np.all(used == 0)


def test_cart_random_tie_break_uses_both_twins():
    data = _twin_columns()
    roots = {int(fit_cart(data, rng=RngStream(s), tie_break="random").feature[0, 0]) for s in range(20)}
    assert roots == {0, 2}
    # the tie rule never changes the fit on the training rows
    model = fit_cart(data, rng=RngStream(3), tie_break="random")
    np.testing.assert_array_equal(model.predict(data.features), fit_cart(data).predict(data.features))


# forests ---------------------------------------------------------------

def test_forest_constant_targets():
    data = RegressionDataset(np.random.default_rng(0).normal(size=(10, 10)), np.full(10, 2.5))
    for model in (fit_random_forest(data, RegressorSpec("rf"), RngStream(0)),
                  fit_extra_trees(data, RegressorSpec("ext"), RngStream(0))):
        np.testing.assert_array_equal(model.predict(np.random.default_rng(1).normal(size=(5, 10))), 2.5)


@pytest.mark.parametrize("tie_break", ["lowest", "random"])
def test_forest_with_full_bootstrap_equals_cart(tie_break):
    data = _data(seed=4)
    rf = fit_random_forest(data, RegressorSpec("rf", n_estimators=1, tie_break=tie_break), RngStream(0),
                           samples=[np.arange(data.n_samples)])
    cart = fit_cart(data, rng=RngStream(0), tie_break=tie_break)
    X = np.random.default_rng(2).normal(size=(30, data.n_features))
    np.testing.assert_array_equal(rf.predict(X), cart.predict(X))


@pytest.mark.parametrize("kind", ["rf", "ext"])
def test_forest_is_mean_of_trees(kind):
    data = _data(seed=5)
    model = fit_regressor(data, RegressorSpec(kind), RngStream(7))
    X = np.random.default_rng(3).normal(size=(25, 10))
    np.testing.assert_allclose(model.predict(X), model.tree_predictions(X).mean(axis=0), rtol=0, atol=1e-12)
    assert model.n_trees == 40


def test_extra_trees_uses_only_informative_feature():
    rng = np.random.default_rng(6)
    X = np.ones((12, 4))
    X[:, 2] = rng.permutation(12)
    y = 3.0 * X[:, 2] - 1.0
    model = fit_extra_trees(RegressionDataset(X, y), RegressorSpec("ext", n_estimators=10), RngStream(1))
    used = model.feature[model.feature >= 0]
    assert np.all(used == 2)
    np.testing.assert_allclose(model.predict(X), y, rtol=0, atol=1e-12)


def test_extra_trees_thresholds_inside_node_range():
    data = _data(n=30, p=4, seed=7)
    model = fit_extra_trees(data, RegressorSpec("ext", n_estimators=5, max_depth=1), RngStream(2))
    for t in range(5):
        f = model.feature[t, 0]
        col = data.features[:, f]
        assert col.min() <= model.threshold[t, 0] < col.max()


# boosting --------------------------------------------------------------

def test_boosting_zero_stages_predicts_mean():
    data = _data(seed=8)
    model = fit_gradient_boosting(data, RegressorSpec("gb", n_estimators=0), RngStream(0))
    np.testing.assert_allclose(model.predict(data.features), data.targets.mean())


def test_boosting_constant_targets():
    data = RegressionDataset(np.arange(20.0).reshape(10, 2), np.full(10, -3.0))
    model = fit_gradient_boosting(data, RegressorSpec.default("gb"), RngStream(0))
    np.testing.assert_array_equal(model.predict(data.features), -3.0)


def test_boosting_single_full_stage_is_exact():
    data = _data(seed=9)
    model = fit_gradient_boosting(data, RegressorSpec("gb", n_estimators=1, learning_rate=1.0), RngStream(0))
    np.testing.assert_allclose(model.predict(data.features), data.targets, rtol=0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.05, 1.0))
def test_boosting_training_mse_non_increasing(seed, lr):
    data = _data(n=15, p=3, seed=seed)
    model = fit_gradient_boosting(data, RegressorSpec("gb", n_estimators=25, learning_rate=lr, max_depth=2),
                                  RngStream(seed))
    mse = [np.mean((model.predict(data.features, m) - data.targets) ** 2) for m in range(26)]
    assert all(b <= a + 1e-12 for a, b in zip(mse, mse[1:]))


def test_boosting_tie_break_rng():
    data = _data(seed=10)
    with pytest.raises(ValueError, match="rng"):
        fit_gradient_boosting(data, RegressorSpec.default("gb"))
    lowest = fit_gradient_boosting(data, RegressorSpec.default("gb", tie_break="lowest"))
    again = fit_gradient_boosting(data, RegressorSpec.default("gb", tie_break="lowest"), RngStream(1))
    np.testing.assert_array_equal(lowest.predict(data.features), again.predict(data.features))


# ridge -----------------------------------------------------------------

def test_ridge_identity_interpolates():
    data = RegressionDataset(np.eye(2), [1.0, 2.0])
    np.testing.assert_allclose(fit_ridge(data, 0.0).predict(data.features), [1.0, 2.0], atol=1e-12)


def test_ridge_large_alpha_tends_to_mean():
    data = _data(seed=10)
    model = fit_ridge(data, 1e12)
    assert np.linalg.norm(model.weights) < 1e-9
    np.testing.assert_allclose(model.predict(data.features), data.targets.mean(), atol=1e-9)


def test_ridge_one_dimensional_slope():
    model = fit_ridge(RegressionDataset([[-1.0], [1.0]], [-1.0, 1.0]), 1.0)
    assert model.weights[0] == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert model.intercept == pytest.approx(0.0, abs=1e-15)


def test_ridge_matches_least_squares_oracle():
    rng = np.random.default_rng(11)
    for _ in range(50):
        p = int(rng.integers(1, 9))
        X = rng.normal(size=(10, p))
        y = rng.normal(size=10)
        A = np.column_stack([X, np.ones(10)])
        coef = np.linalg.lstsq(A, y, rcond=None)[0]
        got = fit_ridge(RegressionDataset(X, y), 0.0).predict(X)
        np.testing.assert_allclose(got, A @ coef, rtol=0, atol=1e-8)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.0, 10.0), st.floats(0.01, 10.0))
def test_ridge_shrinkage(seed, a1, gap):
    data = _data(n=12, p=4, seed=seed)
    w1 = fit_ridge(data, a1).weights
    w2 = fit_ridge(data, a1 + gap).weights
    assert np.linalg.norm(w1) >= np.linalg.norm(w2) - 1e-12


def test_ridge_rank_deficient_unregularised():
    X = np.column_stack([np.arange(5.0), np.arange(5.0)])
    data = RegressionDataset(X, np.arange(5.0) * 2)
    with pytest.raises(RegressionError):
        fit_ridge(data, 0.0)
    model = fit_ridge(data, 0.0, rank_deficient="min_norm")
    np.testing.assert_allclose(model.predict(X), data.targets, atol=1e-10)


# regression vector -----------------------------------------------------

def test_dataset_layout():
    T = np.arange(30.0).reshape(10, 3)
    v = np.array([7.0, 8.0, 9.0])
    data = RegressionDataset.from_trials(T, v)
    assert data.features.shape == (3, 10)
    np.testing.assert_array_equal(data.features[1], T[:, 1])
    np.testing.assert_array_equal(data.targets, v)


def test_dataset_validation():
    with pytest.raises(RegressionError):
        RegressionDataset(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(RegressionError):
        RegressionDataset(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(RegressionError):
        RegressionDataset([[np.nan]], [1.0])


@pytest.mark.parametrize("kind", ["rf", "ext", "gb", "dt", "lm"])
@pytest.mark.parametrize("arrangement", ["rows", "trials"])
def test_degenerate_training_set_gives_validation(kind, arrangement):
    # every trial equals v and v is constant, so every row has the same target
    v = np.full(10, 1.75)
    T = np.tile(v, (10, 1))
    r = build_regression_vector(T, v, RegressorSpec.default(kind), Bounds(-15, 15), RngStream(0), arrangement)
    np.testing.assert_allclose(r, v, atol=1e-12)


def test_unregularised_ridge_recovers_validation():
    rng = np.random.default_rng(12)
    v = rng.uniform(-5, 5, 10)
    other = rng.uniform(-5, 5, 10)
    T = np.vstack([v] + [other] * 9)
    r = build_regression_vector(T, v, RegressorSpec("lm", ridge_alpha=0.0), Bounds(-15, 15), RngStream(0))
    np.testing.assert_allclose(r, v, atol=1e-8)


@pytest.mark.parametrize("kind", ["rf", "ext", "gb", "dt", "lm"])
@pytest.mark.parametrize("arrangement", ["rows", "trials"])
def test_regression_vector_in_bounds(kind, arrangement):
    rng = np.random.default_rng(13)
    T = rng.uniform(-40, 40, (10, 10))
    v = rng.uniform(-40, 40, 10)
    bounds = Bounds(-32, 32)
    r = build_regression_vector(T, v, RegressorSpec.default(kind), bounds, RngStream(1), arrangement)
    assert r.shape == (10,) and bounds.contains(r)


def test_regression_vector_checks():
    with pytest.raises(RegressionError):
        build_regression_vector(np.zeros((9, 10)), np.zeros(10), RegressorSpec("dt"), Bounds(-1, 1), RngStream(0))
    with pytest.raises(ValueError, match="dimension"):
        build_regression_vector(np.zeros((10, 4)), np.zeros(4), RegressorSpec("dt"), Bounds(-1, 1),
                                RngStream(0), "trials")
    with pytest.raises(ValueError):
        build_regression_vector(np.zeros((10, 4)), np.zeros(4), RegressorSpec("dt"), Bounds(-1, 1),
                                RngStream(0), "columns")


def test_trials_arrangement_queries_with_trial_vectors():
    rng = np.random.default_rng(14)
    T = rng.uniform(-5, 5, (10, 10))
    v = rng.uniform(-5, 5, 10)
    spec = RegressorSpec("lm")
    model = fit_ridge(RegressionDataset.from_trials(T, v), 1.0)
    r = build_regression_vector(T, v, spec, Bounds(-15, 15), RngStream(0), "trials")
    np.testing.assert_allclose(r, model.predict(T), atol=1e-12)


def test_spec_validation_and_defaults():
    assert RegressorSpec.default("gb").n_estimators == 100
    assert RegressorSpec.default("gb").max_depth == 3
    assert RegressorSpec.default("rf").n_estimators == 40
    assert RegressorSpec.default("rf").max_depth is None
    assert RegressorSpec.default("lm").ridge_alpha == 1.0
    with pytest.raises(ValueError):
        RegressorSpec("svm")
    with pytest.raises(ValueError):
        RegressorSpec("rf", n_estimators=0)
    with pytest.raises(ValueError):
        RegressorSpec("lm", ridge_alpha=-1)
    assert RegressorSpec.default("rf").tie_break == "random"
    with pytest.raises(ValueError, match="tie_break"):
        RegressorSpec("dt", tie_break="first")


# compiled and interpreted kernels --------------------------------------

def _random_case(seed, n=10, p=10, ties=False):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 4, (n, p)).astype(float) if ties else rng.normal(size=(n, p))
    return X, rng.normal(size=n)


@pytest.mark.skipif(compiled_kernels is None, reason="compiled kernels not built")
@pytest.mark.parametrize("extreme", [False, True])
@pytest.mark.parametrize("max_features", [1, 3, 10])
@pytest.mark.parametrize("ties", [False, True])
@pytest.mark.parametrize("shuffle", [False, True])
def test_kernels_agree_on_trees(extreme, max_features, ties, shuffle):
    for seed in range(10):
        X, y = _random_case(seed, n=15, ties=ties)
        rng = np.random.default_rng(seed)
        samples = rng.integers(0, 15, (6, 15))
        seeds = rng.integers(0, 2**63, 6).astype(np.uint64)
        args = (X, y, samples, seeds, -1, 2, extreme, max_features, shuffle)
        a = _pykernels.build_trees(*args)
        b = compiled_kernels.build_trees(*args)
        for u, w in zip(a, b):
            np.testing.assert_array_equal(u, w)
        Q = np.random.default_rng(seed + 100).normal(size=(8, 10))
        np.testing.assert_array_equal(_pykernels.predict_trees(*a[:5], Q), compiled_kernels.predict_trees(*b[:5], Q))


@pytest.mark.skipif(compiled_kernels is None, reason="compiled kernels not built")
@pytest.mark.parametrize("shuffle", [False, True])
def test_kernels_agree_on_boosting(shuffle):
    for seed in range(5):
        X, y = _random_case(seed, ties=True)
        seeds = np.random.default_rng(seed).integers(0, 2**63, 30).astype(np.uint64)
        a = _pykernels.boost(X, y, 30, 0.1, 3, 2, seeds, shuffle)
        b = compiled_kernels.boost(X, y, 30, 0.1, 3, 2, seeds, shuffle)
        assert a[0] == b[0]
        for u, w in zip(a[1:], b[1:]):
            np.testing.assert_array_equal(u, w)


@pytest.mark.parametrize("kernels", KERNELS)
def test_kernel_input_checks(kernels):
    X, y = _random_case(0)
    with pytest.raises(ValueError):
        kernels.build_trees(X, y, np.zeros((2, 0), dtype=np.intp), np.zeros(2, dtype=np.uint64), -1, 2, False, 10)
    with pytest.raises(ValueError):
        kernels.build_trees(X, y, np.zeros((2, 10), dtype=np.intp), np.zeros(1, dtype=np.uint64), -1, 2, False, 10)
    with pytest.raises(ValueError, match="seed"):
        kernels.boost(X, y, 5, 0.1, 3, 2, np.zeros(2, dtype=np.uint64), True)
