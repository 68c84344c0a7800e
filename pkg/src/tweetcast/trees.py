"""Tree models: CART, random forest, and a gradient-boosted classifier.

CART grows greedily: candidate thresholds are midpoints between
consecutive distinct sorted feature values, the best split maximizes the
weighted impurity reduction for the chosen criterion, and ties break
toward the lower feature index, then the lower threshold. Per-node
feature subsampling and bootstrap draws come from generators derived
deterministically from the master seed, so equal seeds give identical
forests.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, SingleClassError

VARIANCE = "variance"
GINI = "gini"
ENTROPY = "entropy"

ALL_FEATURES = "all"


class EmptyData(DataError):
    pass


@dataclass
class TreeNode:
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: object = None  # mean target, or (p0, p1) class probabilities
    n_samples: int = 0
    impurity: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _n_candidate_features(max_features, d: int) -> int:
    if max_features == ALL_FEATURES or max_features is None:
        return d
    if max_features == "sqrt":
        return max(1, int(np.ceil(np.sqrt(d))))
    if max_features == "log2":
        return max(1, int(np.ceil(np.log2(d))))
    if isinstance(max_features, int) and max_features >= 1:
        return min(d, max_features)
    raise ValueError(f"bad max_features {max_features!r}")


def _node_impurity(criterion: str, w_sum: float, wy_sum: float, wyy_sum: float) -> float:
    """Weighted impurity mass of a node (sums, not means)."""
    if w_sum <= 0.0:
        return 0.0
    if criterion == VARIANCE:
        return wyy_sum - wy_sum * wy_sum / w_sum
    w1 = wy_sum
    w0 = w_sum - w1
    if criterion == GINI:
        return w_sum - (w1 * w1 + w0 * w0) / w_sum
    if criterion == ENTROPY:
        h = 0.0
        for part in (w0, w1):
            if part > 0.0:
                h -= part * np.log2(part / w_sum)
        return h
    raise ValueError(f"unknown criterion {criterion!r}")


def _split_gains(criterion, w, wy, wyy):
    """Impurity reduction for every cut position of a sorted node.

    Inputs are per-row weights and weighted targets in sorted feature
    order; 2-D inputs (rows x features) are scored column-wise in one
    pass. Returns gains for cutting after position i (0-based).
    """
    W = np.cumsum(w, axis=0)
    WY = np.cumsum(wy, axis=0)
    total_w, total_wy = W[-1], WY[-1]
    Wl, WYl = W[:-1], WY[:-1]
    Wr, WYr = total_w - Wl, total_wy - WYl
    with np.errstate(divide="ignore", invalid="ignore"):
        if criterion == VARIANCE:
            WYY = np.cumsum(wyy, axis=0)
            total_wyy = WYY[-1]
            WYYl = WYY[:-1]
            parent = total_wyy - total_wy**2 / total_w
            left = WYYl - WYl**2 / np.where(Wl > 0, Wl, 1.0)
            right = (total_wyy - WYYl) - WYr**2 / np.where(Wr > 0, Wr, 1.0)
        else:
            w1 = np.asarray(total_wy)
            w0 = total_w - w1
            if criterion == GINI:
                parent = total_w - (w1 * w1 + w0 * w0) / total_w
                left = Wl - (WYl**2 + (Wl - WYl) ** 2) / np.where(Wl > 0, Wl, 1.0)
                right = Wr - (WYr**2 + (Wr - WYr) ** 2) / np.where(Wr > 0, Wr, 1.0)
            else:  # entropy

                def _ent(part_w, part_w1):
                    part_w = np.asarray(part_w, dtype=float)
                    part_w1 = np.asarray(part_w1, dtype=float)
                    w0p = part_w - part_w1
                    safe_w = np.where(part_w > 0, part_w, 1.0)
                    out = np.zeros_like(part_w)
                    nz1 = part_w1 > 0
                    out = out - np.where(nz1, part_w1 * np.log2(np.where(nz1, part_w1, 1.0) / safe_w), 0.0)
                    nz0 = w0p > 0
                    out = out - np.where(nz0, w0p * np.log2(np.where(nz0, w0p, 1.0) / safe_w), 0.0)
                    return out

                parent = _ent(total_w, total_wy)
                left = _ent(Wl, WYl)
                right = _ent(Wr, WYr)
    return parent - left - right


def class_weights(y: np.ndarray, class_weight) -> np.ndarray:
    """Per-sample weights; 'balanced' gives each example n/(2*n_class)."""
    n = len(y)
    if class_weight in (None, "none"):
        return np.ones(n)
    if class_weight == "balanced":
        n_pos = float(np.sum(y == 1))
        n_neg = n - n_pos
        if n_pos == 0 or n_neg == 0:
            raise SingleClassError("balanced weights need both classes")
        return np.where(y == 1, n / (2.0 * n_pos), n / (2.0 * n_neg))
    raise ValueError(f"unknown class_weight {class_weight!r}")


def fit_cart(
    X: np.ndarray,
    y: np.ndarray,
    criterion: str = VARIANCE,
    max_depth: int | None = None,
    min_samples_split: int = 2,
    max_features=ALL_FEATURES,
    seed: int = 0,
    class_weight=None,
    sample_weight: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> TreeNode:
    """Grow one CART tree (regression for 'variance', else classification)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] == 0:
        raise EmptyData("cannot fit a tree on zero rows")
    if criterion != VARIANCE and not np.isin(np.unique(y), (0.0, 1.0)).all():
        raise DataError("classification targets must be 0/1")
    n, d = X.shape
    if sample_weight is not None:
        w_all = np.asarray(sample_weight, dtype=float)
    elif criterion != VARIANCE:
        w_all = class_weights(y, class_weight)
    else:
        w_all = np.ones(n)
    if rng is None:
        rng = np.random.default_rng(seed)
    n_feats = _n_candidate_features(max_features, d)

    def make_leaf(idx) -> TreeNode:
        w = w_all[idx]
        yv = y[idx]
        w_sum = float(w.sum())
        wy = float((w * yv).sum())
        if criterion == VARIANCE:
            value = wy / w_sum
            imp = _node_impurity(criterion, w_sum, wy, float((w * yv * yv).sum()))
        else:
            p1 = wy / w_sum
            value = (1.0 - p1, p1)
            imp = _node_impurity(criterion, w_sum, wy, 0.0)
        return TreeNode(value=value, n_samples=len(idx), impurity=imp)

    def grow(idx, depth) -> TreeNode:
        m = len(idx)
        yv = y[idx]
        if (
            m < min_samples_split
            or (max_depth is not None and depth >= max_depth)
            or np.all(yv == yv[0])
        ):
            return make_leaf(idx)
        if n_feats < d:
            feats = np.sort(rng.choice(d, size=n_feats, replace=False))
        else:
            feats = np.arange(d)
        w = w_all[idx]
        # score every candidate feature in one vectorized pass
        sub = X[np.ix_(idx, feats)]
        order = np.argsort(sub, axis=0)
        v = np.take_along_axis(sub, order, axis=0)
        distinct = v[:-1] < v[1:]
        if not distinct.any():
            return make_leaf(idx)
        ws = w[order]
        ys = yv[order]
        wy = ws * ys
        gains = _split_gains(criterion, ws, wy, wy * ys)
        gains = np.where(distinct, gains, -np.inf)
        # first max in feature-major order: lower feature index, then lower threshold
        flat = int(np.argmax(gains.T))
        col, pos = divmod(flat, gains.shape[0])
        gain = float(gains[pos, col])
        parent_imp = _node_impurity(
            criterion, float(w.sum()), float((w * yv).sum()),
            float((w * yv * yv).sum()) if criterion == VARIANCE else 0.0,
        )
        if not gain > 1e-12 * max(1.0, abs(parent_imp)):
            return make_leaf(idx)
        node = make_leaf(idx)  # fills value/impurity/n_samples for the internal node
        node.feature = int(feats[col])
        node.threshold = float((v[pos, col] + v[pos + 1, col]) / 2.0)
        left_idx = idx[order[: pos + 1, col]]
        right_idx = idx[order[pos + 1 :, col]]
        node.left = grow(left_idx, depth + 1)
        node.right = grow(right_idx, depth + 1)
        return node

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 10000))
    try:
        return grow(np.arange(n), 0)
    finally:
        sys.setrecursionlimit(old_limit)


def tree_apply(node: TreeNode, X: np.ndarray) -> np.ndarray:
    """Leaf object per row, routed without recursion (trees can be deep)."""
    X = np.asarray(X, dtype=float)
    out = np.empty(X.shape[0], dtype=object)
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if len(idx) == 0:
            continue
        if nd.is_leaf:
            out[idx] = nd
            continue
        mask = X[idx, nd.feature] <= nd.threshold
        stack.append((nd.right, idx[~mask]))
        stack.append((nd.left, idx[mask]))
    return out


def tree_predict(node: TreeNode, X: np.ndarray) -> np.ndarray:
    """Leaf values per row: means (regression) or prob of class 1."""
    X = np.asarray(X, dtype=float)
    out = np.empty(X.shape[0], dtype=float)
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if len(idx) == 0:
            continue
        if nd.is_leaf:
            out[idx] = nd.value if not isinstance(nd.value, tuple) else nd.value[1]
            continue
        mask = X[idx, nd.feature] <= nd.threshold
        stack.append((nd.right, idx[~mask]))
        stack.append((nd.left, idx[mask]))
    return out


@dataclass
class ForestModel:
    trees: list
    tree_seeds: tuple
    task: str  # regression | classification
    hyperparams: dict = field(default_factory=dict)
    bootstrap: bool = True

    def predict_proba(self, X) -> np.ndarray:
        if self.task != "classification":
            raise ValueError("probabilities only for classification forests")
        return np.mean([tree_predict(t, X) for t in self.trees], axis=0)

    def decision_scores(self, X) -> np.ndarray:
        return self.predict_proba(X)

    def predict(self, X) -> np.ndarray:
        agg = np.mean([tree_predict(t, X) for t in self.trees], axis=0)
        if self.task == "classification":
            return (agg >= 0.5).astype(int)
        return agg


def fit_random_forest(
    X: np.ndarray,
    y: np.ndarray,
    n_estimators: int = 100,
    max_features="log2",
    criterion: str = GINI,
    min_samples_split: int = 2,
    class_weight=None,
    seed: int = 42,
    max_depth: int | None = None,
    bootstrap: bool = True,
) -> ForestModel:
    """Bootstrap-aggregated CART trees with per-node feature subsampling.

    Balanced class weights are computed once on the full training labels
    and carried into each bootstrap sample. Prediction averages tree
    outputs (probability average with a 0.5 threshold for classification).
    """
    if n_estimators < 1:
        raise ValueError("n_estimators must be >= 1")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if n == 0:
        raise EmptyData("cannot fit a forest on zero rows")
    task = "regression" if criterion == VARIANCE else "classification"
    weights = class_weights(y, class_weight) if task == "classification" else np.ones(n)
    children = np.random.SeedSequence(seed).spawn(n_estimators)
    trees = []
    for i in range(n_estimators):
        rng = np.random.default_rng(children[i])
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(
            fit_cart(
                X[idx],
                y[idx],
                criterion=criterion,
                max_depth=max_depth,
                min_samples_split=min_samples_split,
                max_features=max_features,
                sample_weight=weights[idx],
                rng=rng,
            )
        )
    return ForestModel(
        trees,
        tuple(range(n_estimators)),
        task,
        {
            "n_estimators": n_estimators,
            "max_features": max_features,
            "criterion": criterion,
            "min_samples_split": min_samples_split,
            "class_weight": class_weight or "none",
            "seed": seed,
            "max_depth": max_depth,
        },
        bootstrap,
    )


def _sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class GbdtModel:
    init_score: float
    trees: list
    learning_rate: float
    hyperparams: dict = field(default_factory=dict)
    train_logloss: tuple = ()

    def raw_scores(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        F = np.full(X.shape[0], self.init_score)
        for tree in self.trees:
            F += self.learning_rate * tree_predict(tree, X)
        return F

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.raw_scores(X))

    def decision_scores(self, X) -> np.ndarray:
        return self.predict_proba(X)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(int)


def fit_gbdt(
    X: np.ndarray,
    y: np.ndarray,
    n_rounds: int = 100,
    learning_rate: float = 0.1,
    max_depth: int = 3,
    seed: int = 42,
) -> GbdtModel:
    """Stagewise boosted trees on logistic loss.

    Starts from the log-odds of the base rate; each round fits a variance
    tree to the current residuals ``y - sigmoid(F)`` and replaces each
    leaf value with one Newton step (sum of residuals over sum of
    ``p*(1-p)``), then adds the tree scaled by the learning rate.
    """
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    p = float(y.mean())
    if p <= 0.0 or p >= 1.0:
        raise SingleClassError("boosting needs both classes")
    F = np.full(len(y), np.log(p / (1.0 - p)))
    init = float(F[0])
    trees = []
    losses = []
    for _ in range(n_rounds):
        prob = _sigmoid(F)
        residual = y - prob
        hess = prob * (1.0 - prob)
        tree = fit_cart(X, residual, criterion=VARIANCE, max_depth=max_depth, seed=seed)
        leaves = tree_apply(tree, X)
        groups: dict = {}
        for i, leaf in enumerate(leaves):
            groups.setdefault(id(leaf), [leaf, 0.0, 0.0])
            groups[id(leaf)][1] += residual[i]
            groups[id(leaf)][2] += hess[i]
        for leaf, r_sum, h_sum in groups.values():
            leaf.value = r_sum / max(h_sum, 1e-12)
        F = F + learning_rate * tree_predict(tree, X)
        prob = np.clip(_sigmoid(F), 1e-12, 1.0 - 1e-12)
        losses.append(float(-np.mean(y * np.log(prob) + (1.0 - y) * np.log(1.0 - prob))))
        trees.append(tree)
    return GbdtModel(
        init,
        trees,
        learning_rate,
        {"n_rounds": n_rounds, "learning_rate": learning_rate, "max_depth": max_depth, "seed": seed},
        tuple(losses),
    )
