"""Metrics, ROC/AUC, and grid-search contracts with independent oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tweetcast import linear
from tweetcast.errors import SingleClassError
from tweetcast.evaluation import (
    ACCURACY,
    MSE,
    EmptyGrid,
    FoldTooSmall,
    LengthMismatch,
    classification_metrics,
    contiguous_folds,
    cross_validated_grid_search,
    expand_grid,
    f1_score,
    regression_metrics,
    roc_curve_auc,
    shuffled_folds,
)


class TestRegressionMetrics:
    def test_perfect_fit(self):
        assert regression_metrics([1, 2], [1, 2])["mse"] == 0.0

    def test_unit_error(self):
        assert regression_metrics([0, 0], [1, 1])["mse"] == 1.0

    def test_matches_direct_summation_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            y = rng.normal(size=7)
            p = rng.normal(size=7)
            direct = sum((yi - pi) ** 2 for yi, pi in zip(y, p)) / 7
            assert regression_metrics(y, p)["mse"] == pytest.approx(direct, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            regression_metrics([1], [1, 2])


class TestClassificationMetrics:
    def test_study_knn_row_identity(self):
        # published KNN row: precision 0.54, recall 1.0 -> f1 0.70
        assert f1_score(0.54, 1.0) == pytest.approx(0.70, abs=0.005)

    def test_study_naive_bayes_row_identity(self):
        # published NB row: precision 0.55, recall 0.92 -> f1 0.69
        assert f1_score(0.55, 0.92) == pytest.approx(0.69, abs=0.005)

    def test_all_positive_predictor(self):
        y = np.array([1, 1, 0, 0, 0, 1])
        pred = np.ones(6, dtype=int)
        m = classification_metrics(y, pred)
        assert m.recall == 1.0
        assert m.precision == pytest.approx(0.5)
        assert m.confusion.total == 6

    def test_degenerate_zero_denominators(self):
        m = classification_metrics([0, 0, 0], [0, 0, 0])
        assert m.degenerate
        assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)
        assert m.accuracy == 1.0

    def test_accuracy_matches_agreement_count(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            y = rng.integers(0, 2, size=17)
            p = rng.integers(0, 2, size=17)
            assert classification_metrics(y, p).accuracy == np.mean(y == p)

    @settings(max_examples=100, deadline=None)
    @given(p=st.floats(0.01, 1.0), r=st.floats(0.01, 1.0))
    def test_f1_between_min_and_max(self, p, r):
        f1 = f1_score(p, r)
        assert min(p, r) - 1e-12 <= f1 <= max(p, r) + 1e-12


def _pair_counting_auc(y, scores):
    """Probability a random positive outscores a random negative; ties 1/2."""
    pos = [s for s, t in zip(scores, y) if t == 1]
    neg = [s for s, t in zip(scores, y) if t == 0]
    wins = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                wins += 1.0
            elif sp == sn:
                wins += 0.5
    return wins / (len(pos) * len(neg))


class TestRocCurve:
    def test_perfect_separation(self):
        roc = roc_curve_auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9])
        assert roc.auc == 1.0

    def test_all_tied_scores(self):
        roc = roc_curve_auc([0, 1, 0, 1], [0.5, 0.5, 0.5, 0.5])
        assert roc.auc == pytest.approx(0.5, abs=1e-12)

    def test_endpoints_and_monotonicity(self):
        rng = np.random.default_rng(2)
        y = np.array([0, 1] * 6)
        roc = roc_curve_auc(y, rng.normal(size=12))
        assert roc.points[0] == (0.0, 0.0)
        assert roc.points[-1] == (1.0, 1.0)
        fprs = [p[0] for p in roc.points]
        tprs = [p[1] for p in roc.points]
        assert all(a <= b for a, b in zip(fprs, fprs[1:]))
        assert all(a <= b for a, b in zip(tprs, tprs[1:]))

    def test_trapezoid_equals_pair_counting_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(4, 21))
            y = rng.integers(0, 2, size=n)
            if y.min() == y.max():
                y[0] = 1 - y[0]
            scores = np.round(rng.normal(size=n), 1)  # induce ties
            roc = roc_curve_auc(y, scores)
            assert roc.auc == pytest.approx(_pair_counting_auc(y, scores), abs=1e-12)

    def test_single_class_rejected(self):
        with pytest.raises(SingleClassError):
            roc_curve_auc([1, 1], [0.1, 0.2])

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 10000), scale=st.floats(0.1, 5.0), shift=st.floats(-3.0, 3.0))
    def test_auc_invariant_under_monotone_transform(self, seed, scale, shift):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 2, size=15)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        s = rng.normal(size=15)
        base = roc_curve_auc(y, s).auc
        transformed = roc_curve_auc(y, np.exp(scale * s) + shift).auc
        assert transformed == pytest.approx(base, abs=1e-12)


class TestFolds:
    def test_contiguous_partition(self):
        folds = contiguous_folds(23, 5)
        sizes = [len(f) for f in folds]
        assert sum(sizes) == 23
        assert max(sizes) - min(sizes) <= 1
        flat = np.concatenate(folds)
        assert np.array_equal(flat, np.arange(23))

    def test_shuffled_partition(self):
        folds = shuffled_folds(20, 4, seed=1)
        assert np.array_equal(np.sort(np.concatenate(folds)), np.arange(20))

    def test_too_small(self):
        with pytest.raises(FoldTooSmall):
            contiguous_folds(3, 5)


class _RidgeEstimator:
    def __init__(self, params):
        self.lam = params.get("lambda", 0.0)
        self.model = None

    def fit(self, X, y):
        self.model = linear.fit_ridge(X, y, self.lam)
        return self

    def predict(self, X):
        return self.model.predict(X)


class TestGridSearch:
    def _data(self, n=60, d=4, seed=5):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, d))
        y = X @ rng.normal(size=d) + 0.3 * rng.normal(size=n)
        return X, y

    def test_single_combination(self):
        X, y = self._data()
        result = cross_validated_grid_search(_RidgeEstimator, {"lambda": [2.0]}, X, y, k=4, metric=MSE)
        assert result.best_params == {"lambda": 2.0}

    def test_dominating_combination_wins(self):
        X, y = self._data()
        result = cross_validated_grid_search(
            _RidgeEstimator, {"lambda": [0.01, 1e6]}, X, y, k=5, metric=MSE
        )
        assert result.best_params == {"lambda": 0.01}
        cells = {cell.params["lambda"]: cell for cell in result.cv_table}
        assert all(
            a < b for a, b in zip(cells[0.01].fold_scores, cells[1e6].fold_scores)
        )

    def test_matches_exhaustive_rerun_oracle(self):
        X, y = self._data(n=50)
        grid = {"lambda": [0.1, 1.0, 10.0]}
        k = 5
        result = cross_validated_grid_search(_RidgeEstimator, grid, X, y, k=k, metric=MSE)
        # independent oracle: recompute all 15 fold fits from scratch
        folds = np.array_split(np.arange(50), k)
        means = {}
        for lam in grid["lambda"]:
            scores = []
            for fold in folds:
                train = np.setdiff1d(np.arange(50), fold)
                model = linear.fit_ridge(X[train], y[train], lam)
                scores.append(float(np.mean((model.predict(X[fold]) - y[fold]) ** 2)))
            means[lam] = float(np.mean(scores))
        best_lam = min(grid["lambda"], key=lambda l: means[l])
        assert result.best_params == {"lambda": best_lam}
        for cell in result.cv_table:
            assert cell.mean_score == pytest.approx(means[cell.params["lambda"]], abs=1e-12)

    def test_tie_breaks_to_earliest_grid_order(self):
        X, y = self._data(n=40)

        class Constant:
            def __init__(self, params):
                self.params = params

            def fit(self, X, y):
                return self

            def predict(self, X):
                return np.zeros(len(X))

        result = cross_validated_grid_search(Constant, {"c": [7, 8, 9]}, X, y, k=4, metric=MSE)
        assert result.best_params == {"c": 7}

    def test_empty_grid_rejected(self):
        X, y = self._data()
        with pytest.raises(EmptyGrid):
            cross_validated_grid_search(_RidgeEstimator, {"lambda": []}, X, y, k=3, metric=MSE)

    def test_refit_model_present(self):
        X, y = self._data()
        result = cross_validated_grid_search(_RidgeEstimator, {"lambda": [0.5]}, X, y, k=3, metric=MSE)
        assert result.model.model is not None
        assert len(result.model.predict(X)) == len(y)

    def test_expand_grid_order(self):
        combos = expand_grid({"a": [1, 2], "b": ["x", "y"]})
        assert combos == [
            {"a": 1, "b": "x"}, {"a": 1, "b": "y"}, {"a": 2, "b": "x"}, {"a": 2, "b": "y"},
        ]
