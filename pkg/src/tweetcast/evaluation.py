"""Shared evaluation machinery: metrics, ROC/AUC, k-fold grid search."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DataError, SingleClassError

MSE = "mse"
ACCURACY = "accuracy"
F1 = "f1"
AUC = "auc"

#: Metrics where smaller is better.
LOWER_IS_BETTER = frozenset({MSE})


class LengthMismatch(DataError):
    pass


class EmptyGrid(DataError):
    pass


class FoldTooSmall(DataError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ClassificationMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    confusion: ConfusionCounts
    degenerate: bool  # True when a zero denominator forced a metric to 0


def _check_lengths(y_true, y_pred) -> None:
    if len(y_true) != len(y_pred):
        raise LengthMismatch(f"length mismatch: {len(y_true)} vs {len(y_pred)}")
    if len(y_true) == 0:
        raise LengthMismatch("empty input")


def regression_metrics(y_true: Sequence[float], y_pred: Sequence[float]) -> dict:
    """Mean squared error of predictions."""
    _check_lengths(y_true, y_pred)
    t = np.asarray(y_true, dtype=float)
    p = np.asarray(y_pred, dtype=float)
    return {"mse": float(np.mean((t - p) ** 2))}


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def classification_metrics(y_true: Sequence[int], y_pred: Sequence[int]) -> ClassificationMetrics:
    """Accuracy, precision, recall, F1 and confusion counts for 0/1 labels.

    Zero-denominator cases (no predicted positives, or no actual positives)
    yield 0 for the affected metric with the ``degenerate`` flag set, so
    report tables never carry NaNs.
    """
    _check_lengths(y_true, y_pred)
    t = np.asarray(y_true, dtype=int)
    p = np.asarray(y_pred, dtype=int)
    if not (np.isin(t, (0, 1)).all() and np.isin(p, (0, 1)).all()):
        raise DataError("labels must be 0 or 1")
    tp = int(np.sum((t == 1) & (p == 1)))
    fp = int(np.sum((t == 0) & (p == 1)))
    tn = int(np.sum((t == 0) & (p == 0)))
    fn = int(np.sum((t == 1) & (p == 0)))
    confusion = ConfusionCounts(tp, fp, tn, fn)
    degenerate = False
    if tp + fp == 0:
        precision, degenerate = 0.0, True
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall, degenerate = 0.0, True
    else:
        recall = tp / (tp + fn)
    accuracy = (tp + tn) / confusion.total
    return ClassificationMetrics(accuracy, precision, recall, f1_score(precision, recall), confusion, degenerate)


@dataclass(frozen=True)
class RocCurve:
    points: tuple  # ordered (fpr, tpr) pairs from (0,0) to (1,1)
    auc: float


def roc_curve_auc(y_true: Sequence[int], scores: Sequence[float]) -> RocCurve:
    """ROC points swept over distinct scores descending, with trapezoid AUC.

    Tied scores move as one group, so the AUC equals the probability that a
    random positive outscores a random negative, counting ties as 1/2.
    """
    _check_lengths(y_true, scores)
    t = np.asarray(y_true, dtype=int)
    s = np.asarray(scores, dtype=float)
    n_pos = int(np.sum(t == 1))
    n_neg = int(np.sum(t == 0))
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("ROC needs at least one positive and one negative")
    order = np.argsort(-s, kind="stable")
    t_sorted = t[order]
    s_sorted = s[order]
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    n = len(t_sorted)
    while i < n:
        j = i
        while j < n and s_sorted[j] == s_sorted[i]:
            tp += int(t_sorted[j] == 1)
            fp += int(t_sorted[j] == 0)
            j += 1
        points.append((fp / n_neg, tp / n_pos))
        i = j
    auc = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return RocCurve(tuple(points), auc)


def contiguous_folds(n: int, k: int) -> list[np.ndarray]:
    """k contiguous index blocks covering range(n), sizes differing by <= 1."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise FoldTooSmall(f"cannot make {k} folds from {n} rows")
    return [np.asarray(fold) for fold in np.array_split(np.arange(n), k)]


def shuffled_folds(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Plain shuffled k-fold, for fidelity runs that ignore time order."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise FoldTooSmall(f"cannot make {k} folds from {n} rows")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(fold) for fold in np.array_split(perm, k)]


@dataclass(frozen=True)
class CvCell:
    params: dict
    fold_scores: tuple
    mean_score: float


@dataclass(frozen=True)
class GridSearchResult:
    best_params: dict
    cv_table: tuple  # CvCell rows in grid order
    metric: str
    model: object = None  # refit on the full training split with best_params

    def best_cell(self) -> CvCell:
        for cell in self.cv_table:
            if cell.params == self.best_params:
                return cell
        raise KeyError("best_params not in cv_table")


def expand_grid(grid: dict) -> list[dict]:
    """All combinations of a name->values map, in given order."""
    if not grid:
        return [{}]
    names = list(grid)
    combos = []
    for values in itertools.product(*(grid[name] for name in names)):
        combos.append(dict(zip(names, values)))
    return combos


def _score(metric: str, estimator, X, y) -> float:
    if metric == MSE:
        return regression_metrics(y, estimator.predict(X))["mse"]
    if metric == ACCURACY:
        return classification_metrics(y, estimator.predict(X)).accuracy
    if metric == F1:
        return classification_metrics(y, estimator.predict(X)).f1
    if metric == AUC:
        return roc_curve_auc(y, estimator.decision_scores(X)).auc
    raise ValueError(f"unknown metric {metric!r}")


def cross_validated_grid_search(
    make_estimator: Callable[[dict], object],
    grid: dict,
    X: np.ndarray,
    y: np.ndarray,
    k: int = 5,
    metric: str = MSE,
    shuffle: bool = False,
    seed: int = 42,
) -> GridSearchResult:
    """Exhaustive grid search scored by k-fold cross-validation.

    Rows must already be date-ordered; folds are contiguous time blocks by
    default (``shuffle=True`` switches to seeded shuffled folds). Every
    combination is fitted k times with one fold held out; the winner has
    the best mean validation score, ties broken by earliest grid order,
    and is refit on all provided rows.
    """
    combos = expand_grid(grid)
    if not combos:
        raise EmptyGrid("no grid combinations")
    n = len(y)
    folds = shuffled_folds(n, k, seed) if shuffle else contiguous_folds(n, k)
    all_idx = np.arange(n)
    cells = []
    for params in combos:
        fold_scores = []
        for fold in folds:
            train_idx = np.setdiff1d(all_idx, fold)
            est = make_estimator(dict(params))
            est.fit(X[train_idx], y[train_idx])
            fold_scores.append(_score(metric, est, X[fold], y[fold]))
        cells.append(CvCell(dict(params), tuple(fold_scores), float(np.mean(fold_scores))))
    sign = -1.0 if metric in LOWER_IS_BETTER else 1.0
    best = max(range(len(cells)), key=lambda i: (sign * cells[i].mean_score, -i))
    best_params = dict(cells[best].params)
    final = make_estimator(dict(best_params))
    final.fit(X, y)
    return GridSearchResult(best_params, tuple(cells), metric, final)
