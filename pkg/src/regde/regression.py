"""Regression models that blend the strategy ensemble into one trial vector.

Training data are arranged per dimension: for a test set of ten trials and
a validation vector ``v`` of length D, sample ``j`` has the ten trial
components at position ``j`` as features and ``v[j]`` as target.

Two query arrangements turn the fitted model into a D-vector:

``"rows"``
    In-sample prediction on the D training rows.
``"trials"``
    Prediction with the ten trial vectors themselves as query rows. Output
    component ``i`` is the model's value for trial ``i``, which only lines
    up with a D-vector when D equals the ensemble size (10).

All five models are fitted here: CART, random forest (bagged CART),
extremely randomized trees, least-squares gradient boosting and ridge. The
tree kernels come from :mod:`regde._backend`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import _backend
from .core import Bounds, RngStream, clamp_to_bounds

KINDS = ("rf", "ext", "gb", "dt", "lm")
ARRANGEMENTS = ("rows", "trials")
TIE_BREAKS = ("random", "lowest")


class RegressionError(ValueError):
    """A model could not be fitted (empty data, singular ridge system...)."""


@dataclass(frozen=True)
class RegressionDataset:
    features: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.ascontiguousarray(self.targets, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1:
            raise RegressionError("features must be 2-D and targets 1-D")
        if len(X) != len(y):
            raise RegressionError(f"{len(X)} feature rows but {len(y)} targets")
        if len(y) == 0:
            raise RegressionError("empty dataset")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise RegressionError("dataset entries must be finite")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", y)

    @classmethod
    def from_trials(cls, test_set, validation) -> "RegressionDataset":
        """Row j holds component j of every trial; target j is ``validation[j]``."""
        T = np.asarray(test_set, dtype=np.float64)
        v = np.asarray(validation, dtype=np.float64)
        if T.ndim != 2 or T.shape[1] != len(v):
            raise RegressionError(f"test set of shape {T.shape} does not match validation length {len(v)}")
        return cls(T.T, v)

    @property
    def n_samples(self) -> int:
        return len(self.targets)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class RegressorSpec:
    """Model choice and hyperparameters.

    ``max_depth=None`` grows trees until leaves are pure or too small.
    ``max_features=None`` considers every feature at each split.
    ``tie_break`` decides between equally good best splits: ``"random"``
    visits features in a fresh random order per node and keeps the first,
    ``"lowest"`` keeps the lowest feature index. Extreme splits ignore it.
    """

    kind: str
    n_estimators: int = 40
    learning_rate: float = 0.1
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    max_features: Optional[int] = None
    ridge_alpha: float = 1.0
    tie_break: str = "random"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regressor kind {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.n_estimators < 0 or (self.kind in ("rf", "ext") and self.n_estimators < 1):
            raise ValueError(f"n_estimators must be positive, got {self.n_estimators}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError(f"max_depth must be positive or None, got {self.max_depth}")
        if self.min_samples_split < 2:
            raise ValueError(f"min_samples_split must be >= 2, got {self.min_samples_split}")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError(f"max_features must be positive or None, got {self.max_features}")
        if self.ridge_alpha < 0:
            raise ValueError(f"ridge_alpha must be nonnegative, got {self.ridge_alpha}")
        if self.tie_break not in TIE_BREAKS:
            raise ValueError(f"tie_break must be one of {', '.join(TIE_BREAKS)}, got {self.tie_break!r}")

    @classmethod
    def default(cls, kind: str, **overrides) -> "RegressorSpec":
        base = {
            "rf": dict(n_estimators=40),
            "ext": dict(n_estimators=40),
            "gb": dict(n_estimators=100, learning_rate=0.1, max_depth=3),
            "dt": dict(n_estimators=1),
            "lm": dict(ridge_alpha=1.0),
        }
        if kind not in base:
            raise ValueError(f"unknown regressor kind {kind!r}; choose from {', '.join(KINDS)}")
        return cls(kind, **{**base[kind], **overrides})

    def with_overrides(self, **overrides) -> "RegressorSpec":
        return replace(self, **overrides)


def _depth_arg(max_depth):
    return -1 if max_depth is None else int(max_depth)


def _features_arg(max_features, n_features):
    return n_features if max_features is None else min(int(max_features), n_features)


@dataclass(frozen=True)
class TreeEnsemble:
    """One or more regression trees averaged with equal weight."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_nodes: np.ndarray
    n_features: int

    @property
    def n_trees(self) -> int:
        return len(self.n_nodes)

    def _rows(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features per row, got {X.shape[1]}")
        return X

    def tree_predictions(self, X) -> np.ndarray:
        """Shape ``(n_trees, n_rows)``."""
        X = self._rows(X)
        return _backend.kernels.predict_trees(self.feature, self.threshold, self.left, self.right,
                                              self.value, X)

    def predict(self, X) -> np.ndarray:
        return self.tree_predictions(X).mean(axis=0)


@dataclass(frozen=True)
class BoostedTrees:
    init: float
    learning_rate: float
    stages: TreeEnsemble

    def predict(self, X, n_stages: Optional[int] = None) -> np.ndarray:
        X = self.stages._rows(X)
        pred = np.full(len(X), self.init)
        if self.stages.n_trees == 0:
            return pred
        per_stage = self.stages.tree_predictions(X)
        stop = per_stage.shape[0] if n_stages is None else n_stages
        for m in range(stop):
            pred = pred + self.learning_rate * per_stage[m]
        return pred


@dataclass(frozen=True)
class RidgeModel:
    weights: np.ndarray
    intercept: float

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        return X @ self.weights + self.intercept


def _grow_trees(data: RegressionDataset, samples, seeds, max_depth, min_samples_split, extreme,
                max_features, shuffle=False) -> TreeEnsemble:
    p = data.n_features
    out = _backend.kernels.build_trees(
        data.features, data.targets, np.ascontiguousarray(samples, dtype=np.intp),
        np.ascontiguousarray(seeds, dtype=np.uint64), _depth_arg(max_depth),
        int(min_samples_split), bool(extreme), _features_arg(max_features, p),
        bool(shuffle) and not extreme,
    )
    return TreeEnsemble(*out, n_features=p)


def fit_cart(data: RegressionDataset, min_samples_split: int = 2, max_depth: Optional[int] = None,
             max_features: Optional[int] = None, split_rule: str = "best",
             rng: Optional[RngStream] = None, tie_break: str = "lowest") -> TreeEnsemble:
    """Grow a single regression tree on every sample.

    ``split_rule="best"`` scans all thresholds of the candidate features and
    keeps the split with the largest variance reduction. Ties go to the
    lowest threshold of the first feature visited; features are visited in
    ascending order with ``tie_break="lowest"`` and in random order with
    ``tie_break="random"``. ``split_rule="extreme"``
    draws a threshold uniformly between the node's min and max of each
    candidate feature and keeps the best of those; with ``max_features=1``
    both the feature and the threshold are purely random. Randomness (subset
    draws, extreme thresholds, random visit order) needs ``rng``.
    """
    if split_rule not in ("best", "extreme"):
        raise ValueError(f"split_rule must be 'best' or 'extreme', got {split_rule!r}")
    if tie_break not in TIE_BREAKS:
        raise ValueError(f"tie_break must be one of {', '.join(TIE_BREAKS)}, got {tie_break!r}")
    shuffle = split_rule == "best" and tie_break == "random"
    needs_rng = (split_rule == "extreme" or shuffle
                 or (max_features is not None and max_features < data.n_features))
    if needs_rng and rng is None:
        raise ValueError("this split configuration draws random numbers; pass rng")
    seeds = rng.seeds(1) if needs_rng else np.zeros(1, dtype=np.uint64)
    samples = np.arange(data.n_samples)[None, :]
    return _grow_trees(data, samples, seeds, max_depth, min_samples_split,
                       split_rule == "extreme", max_features, shuffle)


def predict_tree(model: TreeEnsemble, row) -> float:
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1 or len(row) != model.n_features:
        raise ValueError(f"row must have {model.n_features} features")
    return float(model.predict(row)[0])


def fit_random_forest(data: RegressionDataset, spec: RegressorSpec, rng: RngStream,
                      samples=None) -> TreeEnsemble:
    """Bagged best-split trees; each tree sees a bootstrap of n rows drawn with replacement.

    ``samples`` overrides the bootstrap draw, one row of sample ids per tree.
    """
    n = data.n_samples
    if samples is None:
        samples = rng.integers(0, n, size=(spec.n_estimators, n))
    samples = np.asarray(samples, dtype=np.intp)
    seeds = rng.seeds(len(samples))
    return _grow_trees(data, samples, seeds, spec.max_depth, spec.min_samples_split, False,
                       spec.max_features, spec.tie_break == "random")


def fit_extra_trees(data: RegressionDataset, spec: RegressorSpec, rng: RngStream) -> TreeEnsemble:
    """Extreme-split trees, all grown on the full training set (no bagging)."""
    n = data.n_samples
    samples = np.broadcast_to(np.arange(n), (spec.n_estimators, n))
    seeds = rng.seeds(spec.n_estimators)
    return _grow_trees(data, samples, seeds, spec.max_depth, spec.min_samples_split, True,
                       spec.max_features)


def fit_gradient_boosting(data: RegressionDataset, spec: RegressorSpec,
                          rng: Optional[RngStream] = None) -> BoostedTrees:
    """Stage-wise least-squares boosting starting from the target mean.

    Each stage fits a depth-limited best-split tree to the current residuals
    and adds ``learning_rate`` times its prediction. ``rng`` seeds the
    per-stage feature visit order and is only needed with
    ``tie_break="random"``.
    """
    shuffle = spec.tie_break == "random"
    if shuffle and rng is None:
        raise ValueError("tie_break='random' draws random numbers; pass rng")
    seeds = rng.seeds(max(spec.n_estimators, 1)) if shuffle else None
    init, *trees = _backend.kernels.boost(data.features, data.targets, int(spec.n_estimators),
                                          float(spec.learning_rate), _depth_arg(spec.max_depth),
                                          int(spec.min_samples_split), seeds, shuffle)
    return BoostedTrees(float(init), float(spec.learning_rate),
                        TreeEnsemble(*trees, n_features=data.n_features))


def fit_ridge(data: RegressionDataset, alpha: float = 1.0, rank_deficient: str = "raise") -> RidgeModel:
    """Ridge regression with an unpenalised intercept.

    Solves ``(Xc'Xc + alpha I) w = Xc'yc`` on centred data and recovers the
    intercept from the means. At ``alpha=0`` the least-squares weights are
    only unique when the feature matrix has full column rank: with
    ``rank_deficient="raise"`` a rank-deficient matrix is reported,
    ``"min_norm"`` takes the minimum-norm solution. A full-rank matrix that
    loses rank only through centring (fewer samples than features plus one)
    still interpolates, so it also gets the minimum-norm solution.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    if rank_deficient not in ("raise", "min_norm"):
        raise ValueError(f"rank_deficient must be 'raise' or 'min_norm', got {rank_deficient!r}")
    X, y = data.features, data.targets
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    yc = y - y_mean
    p = X.shape[1]
    if alpha == 0:
        if rank_deficient == "raise" and np.linalg.matrix_rank(X) < p:
            raise RegressionError("rank-deficient features; the unregularised system has no unique solution")
        w = np.linalg.lstsq(Xc, yc, rcond=None)[0]
        return RidgeModel(w, float(y_mean - x_mean @ w))
    A = Xc.T @ Xc + alpha * np.eye(p)
    try:
        w = np.linalg.solve(A, Xc.T @ yc)
    except np.linalg.LinAlgError as exc:
        raise RegressionError(f"ridge system is singular: {exc}") from exc
    return RidgeModel(w, float(y_mean - x_mean @ w))


def fit_regressor(data: RegressionDataset, spec: RegressorSpec, rng: RngStream,
                  rank_deficient: str = "raise"):
    if spec.kind == "rf":
        return fit_random_forest(data, spec, rng)
    if spec.kind == "ext":
        return fit_extra_trees(data, spec, rng)
    if spec.kind == "gb":
        return fit_gradient_boosting(data, spec, rng)
    if spec.kind == "dt":
        return fit_cart(data, spec.min_samples_split, spec.max_depth, spec.max_features,
                        "best", rng, spec.tie_break)
    return fit_ridge(data, spec.ridge_alpha, rank_deficient)


def build_regression_vector(test_set, validation, spec: RegressorSpec, bounds: Bounds,
                            rng: RngStream, arrangement: str = "rows") -> np.ndarray:
    """Fit ``spec`` on (test set, validation) and return the clamped blended vector.

    Parameters
    ----------
    test_set : array_like, shape (10, D)
        Unevaluated trials, one per ensemble strategy.
    validation : array_like, shape (D,)
        Regression target.
    arrangement : {"rows", "trials"}
        Query rows fed to the fitted model; see the module docstring.
    """
    if arrangement not in ARRANGEMENTS:
        raise ValueError(f"unknown arrangement {arrangement!r}; choose from {', '.join(ARRANGEMENTS)}")
    T = np.asarray(test_set, dtype=np.float64)
    if T.ndim != 2 or len(T) != 10:
        raise RegressionError(f"expected a test set of 10 trials, got shape {T.shape}")
    data = RegressionDataset.from_trials(T, validation)
    if arrangement == "trials" and data.n_samples != len(T):
        raise ValueError(f"the 'trials' arrangement needs dimension {len(T)}, got {data.n_samples}")
    # all least-squares solutions agree on the training rows, so an
    # unregularised ridge on a singular design takes the minimum-norm one
    model = fit_regressor(data, spec, rng, rank_deficient="min_norm")
    r = model.predict(data.features if arrangement == "rows" else T)
    if not np.all(np.isfinite(r)):
        raise RegressionError("regression produced non-finite components")
    return clamp_to_bounds(r, bounds)
