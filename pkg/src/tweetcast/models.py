"""Model roster: builders, default grids, and estimator adapters.

Six regressors and eight classifiers, matching the study's line-up, with
two generic boosted-tree configurations standing in for the two external
boosting libraries. Every adapter exposes ``fit(X, y)`` / ``predict(X)``
(plus ``decision_scores`` for classifiers) over pre-standardized
matrices, which is what the grid search and the pipeline drive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import classifiers, linear, neural, trees
from .errors import ConfigError

REGRESSION_ROSTER = ("ols", "ridge", "lasso", "cart", "forest", "mlp")
CLASSIFICATION_ROSTER = ("logistic", "knn", "gnb", "svm", "cart", "forest", "gbdt", "gbdt_alt")


@dataclass
class ModelSpec:
    name: str
    task: str
    make: Callable[[dict, int], object]
    default_grid: dict = field(default_factory=dict)


class _FunctionalEstimator:
    """fit/predict shim over the functional model APIs."""

    def __init__(self, fit_fn, predict_fn, scores_fn=None):
        self._fit_fn = fit_fn
        self._predict_fn = predict_fn
        self._scores_fn = scores_fn
        self.model = None

    def fit(self, X, y):
        self.model = self._fit_fn(X, y)
        return self

    def predict(self, X):
        return self._predict_fn(self.model, X)

    def decision_scores(self, X):
        if self._scores_fn is None:
            raise ValueError("no decision scores for this model")
        return self._scores_fn(self.model, X)


def _make_ols(params, seed):
    return _FunctionalEstimator(lambda X, y: linear.fit_ols(X, y), lambda m, X: m.predict(X))


def _make_ridge(params, seed):
    lam = params.get("lambda", 1.0)
    return _FunctionalEstimator(lambda X, y: linear.fit_ridge(X, y, lam), lambda m, X: m.predict(X))


def _make_lasso(params, seed):
    lam = params.get("lambda", 1.0)
    return _FunctionalEstimator(
        lambda X, y: linear.fit_lasso(X, y, lam, standardized=True),
        lambda m, X: m.predict(X),
    )


def _make_logistic(params, seed):
    l2 = params.get("l2", 1.0)
    cw = params.get("class_weight", "none")
    return _FunctionalEstimator(
        lambda X, y: linear.fit_logistic(X, y, l2=l2, class_weight=None if cw == "none" else cw),
        lambda m, X: m.predict(X),
        lambda m, X: m.predict_proba(X),
    )


def _make_cart_reg(params, seed):
    depth = params.get("max_depth")
    return _FunctionalEstimator(
        lambda X, y: trees.fit_cart(
            X, y, criterion=trees.VARIANCE, max_depth=depth,
            min_samples_split=params.get("min_samples_split", 2), seed=seed,
        ),
        lambda m, X: trees.tree_predict(m, X),
    )


def _make_cart_clf(params, seed):
    depth = params.get("max_depth")
    return _FunctionalEstimator(
        lambda X, y: trees.fit_cart(
            X, y, criterion=params.get("criterion", trees.GINI), max_depth=depth,
            min_samples_split=params.get("min_samples_split", 2), seed=seed,
        ),
        lambda m, X: (trees.tree_predict(m, X) >= 0.5).astype(int),
        lambda m, X: trees.tree_predict(m, X),
    )


def _make_forest_reg(params, seed):
    return _FunctionalEstimator(
        lambda X, y: trees.fit_random_forest(
            X, y, n_estimators=params.get("n_estimators", 100),
            max_features=params.get("max_features", "log2"), criterion=trees.VARIANCE,
            min_samples_split=params.get("min_samples_split", 2), seed=seed,
        ),
        lambda m, X: m.predict(X),
    )


def _make_forest_clf(params, seed):
    cw = params.get("class_weight", "balanced")
    return _FunctionalEstimator(
        lambda X, y: trees.fit_random_forest(
            X, y, n_estimators=params.get("n_estimators", 100),
            max_features=params.get("max_features", "log2"),
            criterion=params.get("criterion", trees.GINI),
            min_samples_split=params.get("min_samples_split", 2),
            class_weight=None if cw == "none" else cw, seed=seed,
        ),
        lambda m, X: m.predict(X),
        lambda m, X: m.predict_proba(X),
    )


def _make_gbdt(params, seed):
    return _FunctionalEstimator(
        lambda X, y: trees.fit_gbdt(
            X, y, n_rounds=params.get("n_rounds", 100),
            learning_rate=params.get("learning_rate", 0.1),
            max_depth=params.get("max_depth", 3), seed=seed,
        ),
        lambda m, X: m.predict(X),
        lambda m, X: m.predict_proba(X),
    )


def _make_knn(params, seed):
    k = params.get("k", 5)
    return _FunctionalEstimator(
        lambda X, y: classifiers.build_knn_index(X, y.astype(int), min(k, len(y)), standardized=True),
        lambda m, X: m.predict(X),
        lambda m, X: m.decision_scores(X),
    )


def _make_gnb(params, seed):
    return _FunctionalEstimator(
        lambda X, y: classifiers.fit_gaussian_nb(X, y.astype(int)),
        lambda m, X: m.predict(X),
        lambda m, X: m.decision_scores(X),
    )


def _make_svm(params, seed):
    return _FunctionalEstimator(
        lambda X, y: classifiers.fit_svm_rbf(
            X, y.astype(int), C=params.get("C", 1.0), gamma=params.get("gamma"),
            seed=seed, standardized=True,
        ),
        lambda m, X: m.predict(X),
        lambda m, X: m.decision_scores(X),
    )


def _make_mlp(params, seed):
    return _FunctionalEstimator(
        lambda X, y: neural.fit_mlp(
            X, y, hidden=params.get("hidden", (32, 16)), lr=params.get("lr", 0.01),
            epochs=params.get("epochs", 200), batch_size=params.get("batch_size", 32),
            seed=seed, standardized=True,
        ),
        lambda m, X: m.predict(X),
    )


LAMBDA_GRID = {"lambda": [0.01, 0.1, 1.0, 10.0, 100.0]}

REGISTRY = {
    ("regression", "ols"): ModelSpec("ols", "regression", _make_ols, {}),
    ("regression", "ridge"): ModelSpec("ridge", "regression", _make_ridge, dict(LAMBDA_GRID)),
    ("regression", "lasso"): ModelSpec("lasso", "regression", _make_lasso, dict(LAMBDA_GRID)),
    ("regression", "cart"): ModelSpec(
        "cart", "regression", _make_cart_reg, {"max_depth": [3, 5, 10, None]}
    ),
    ("regression", "forest"): ModelSpec(
        "forest", "regression", _make_forest_reg,
        {"n_estimators": [100], "max_features": ["all"]},
    ),
    ("regression", "mlp"): ModelSpec("mlp", "regression", _make_mlp, {"lr": [0.003, 0.01]}),
    ("classification", "logistic"): ModelSpec(
        "logistic", "classification", _make_logistic, {"l2": [0.01, 0.1, 1.0, 10.0, 100.0]}
    ),
    ("classification", "knn"): ModelSpec(
        "knn", "classification", _make_knn, {"k": [3, 5, 7, 11, 15]}
    ),
    ("classification", "gnb"): ModelSpec("gnb", "classification", _make_gnb, {}),
    ("classification", "svm"): ModelSpec(
        "svm", "classification", _make_svm, {"C": [0.1, 1.0, 10.0]}
    ),
    ("classification", "cart"): ModelSpec(
        "cart", "classification", _make_cart_clf, {"max_depth": [3, 5, 10, None]}
    ),
    ("classification", "forest"): ModelSpec(
        "forest", "classification", _make_forest_clf,
        {
            "n_estimators": [100], "max_features": ["log2"], "criterion": ["gini"],
            "min_samples_split": [2], "class_weight": ["balanced"],
        },
    ),
    ("classification", "gbdt"): ModelSpec(
        "gbdt", "classification", _make_gbdt,
        {"n_rounds": [100], "learning_rate": [0.1], "max_depth": [3]},
    ),
    ("classification", "gbdt_alt"): ModelSpec(
        "gbdt_alt", "classification", _make_gbdt,
        {"n_rounds": [150], "learning_rate": [0.05], "max_depth": [4]},
    ),
}


def roster(task: str) -> tuple:
    if task == "regression":
        return REGRESSION_ROSTER
    if task == "classification":
        return CLASSIFICATION_ROSTER
    raise ConfigError(f"no model roster for task {task!r}")


def get_spec(task: str, name: str) -> ModelSpec:
    try:
        return REGISTRY[(task, name)]
    except KeyError:
        raise ConfigError(f"unknown model {name!r} for task {task!r}") from None


def selected_models(task: str, selection: str) -> tuple:
    if selection == "all":
        return roster(task)
    if (task, selection) not in REGISTRY:
        raise ConfigError(f"unknown model {selection!r} for task {task!r}")
    return (selection,)
