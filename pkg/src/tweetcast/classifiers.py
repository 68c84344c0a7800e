"""K-nearest-neighbors, Gaussian naive Bayes, and RBF-kernel SVM.

The SVM trains with simplified sequential minimal optimization: sweep the
examples, and for each multiplier violating its KKT condition beyond the
tolerance, pair it with a random second index (seeded generator) and solve
the two-variable subproblem analytically. Desk-scale training sets keep
this adequate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NotStandardizedError, SingleClassError


class DimensionMismatch(DataError):
    pass


# --- k-nearest-neighbors ----------------------------------------------------


@dataclass
class KnnIndex:
    X: np.ndarray  # standardized training rows
    y: np.ndarray
    k: int

    def predict(self, Q) -> np.ndarray:
        return knn_classify(self, Q)[0]

    def decision_scores(self, Q) -> np.ndarray:
        return knn_classify(self, Q)[1]

    def fit(self, X, y):  # estimator-protocol shim for grid search
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=int)
        if self.k > len(self.y):
            self.k = len(self.y)
        return self


def build_knn_index(X: np.ndarray, y: np.ndarray, k: int, standardized: bool = False) -> KnnIndex:
    if not standardized:
        raise NotStandardizedError("knn distances require standardized features")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if not 1 <= k <= len(y):
        raise ValueError(f"k must be in [1, {len(y)}], got {k}")
    return KnnIndex(X, y, k)


def knn_classify(index: KnnIndex, Q: np.ndarray):
    """Majority vote among the k nearest training rows by Euclidean distance.

    Distance ties prefer the lower training-row index (stable sort); vote
    ties go to label 1. Returns ``(labels, positive-vote fractions)``.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape[1] != index.X.shape[1]:
        raise DimensionMismatch(f"query d={Q.shape[1]} vs index d={index.X.shape[1]}")
    d2 = ((Q[:, None, :] - index.X[None, :, :]) ** 2).sum(axis=2)
    nearest = np.argsort(d2, axis=1, kind="stable")[:, : index.k]
    votes = index.y[nearest].mean(axis=1)
    labels = (votes >= 0.5).astype(int)
    return labels, votes


# --- Gaussian naive Bayes ---------------------------------------------------


@dataclass
class GnbModel:
    priors: np.ndarray  # P(class 0), P(class 1)
    means: np.ndarray  # 2 x d
    variances: np.ndarray  # 2 x d, smoothed
    epsilon: float

    def posterior(self, Q) -> np.ndarray:
        """Normalized class posteriors, shape (n, 2)."""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if Q.shape[1] != self.means.shape[1]:
            raise DimensionMismatch(f"query d={Q.shape[1]} vs model d={self.means.shape[1]}")
        log_post = np.empty((Q.shape[0], 2))
        for c in range(2):
            diff = Q - self.means[c]
            log_like = -0.5 * np.sum(
                np.log(2.0 * np.pi * self.variances[c]) + diff * diff / self.variances[c], axis=1
            )
            log_post[:, c] = np.log(self.priors[c]) + log_like
        log_post -= log_post.max(axis=1, keepdims=True)
        post = np.exp(log_post)
        return post / post.sum(axis=1, keepdims=True)

    def predict(self, Q) -> np.ndarray:
        return np.argmax(self.posterior(Q), axis=1)  # tie -> lower class index

    def decision_scores(self, Q) -> np.ndarray:
        return self.posterior(Q)[:, 1]

    def predict_proba(self, Q) -> np.ndarray:
        return self.posterior(Q)[:, 1]


def fit_gaussian_nb(X: np.ndarray, y: np.ndarray, epsilon_scale: float = 1e-9) -> GnbModel:
    """Per-class feature Gaussians with variance smoothing.

    Smoothing adds ``epsilon_scale * max feature variance`` to every
    class-conditional variance so degenerate features stay finite.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(np.unique(y)) < 2:
        raise SingleClassError("naive Bayes needs both classes")
    eps = epsilon_scale * float(X.var(axis=0).max())
    if eps == 0.0:
        eps = epsilon_scale
    priors = np.array([(y == 0).mean(), (y == 1).mean()])
    means = np.vstack([X[y == c].mean(axis=0) for c in (0, 1)])
    variances = np.vstack([X[y == c].var(axis=0) for c in (0, 1)]) + eps
    return GnbModel(priors, means, variances, eps)


# --- RBF-kernel SVM via simplified SMO ---------------------------------------


@dataclass
class SvmModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * t_i for support rows
    bias: float
    gamma: float
    C: float
    hyperparams: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def decision_scores(self, Q) -> np.ndarray:
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if self.support_vectors.shape[0] == 0:
            return np.full(Q.shape[0], self.bias)
        K = rbf_kernel(Q, self.support_vectors, self.gamma)
        return K @ self.dual_coef + self.bias

    def predict(self, Q) -> np.ndarray:
        return (self.decision_scores(Q) >= 0.0).astype(int)


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    a2 = (A * A).sum(axis=1)[:, None]
    b2 = (B * B).sum(axis=1)[None, :]
    d2 = np.maximum(a2 + b2 - 2.0 * (A @ B.T), 0.0)
    return np.exp(-gamma * d2)


def svm_dual_objective(alphas: np.ndarray, t: np.ndarray, K: np.ndarray) -> float:
    """W(alpha) = sum(alpha) - 1/2 sum_ij alpha_i alpha_j t_i t_j K_ij."""
    at = alphas * t
    return float(alphas.sum() - 0.5 * at @ K @ at)


def fit_svm_rbf(
    X: np.ndarray,
    y: np.ndarray,
    C: float = 1.0,
    gamma: float | None = None,
    tol: float = 1e-3,
    max_passes: int = 10,
    seed: int = 42,
    max_sweeps: int = 2000,
    standardized: bool = False,
) -> SvmModel:
    """Train a soft-margin RBF SVM on 0/1 labels (internally -1/+1).

    Runs until ``max_passes`` consecutive full sweeps change no multiplier;
    ``max_sweeps`` caps total sweeps and sets ``flags["converged"]=False``
    when hit. ``gamma`` defaults to 1/d.
    """
    if not standardized:
        raise NotStandardizedError("svm requires standardized features")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(np.unique(y)) < 2:
        raise SingleClassError("svm needs both classes")
    n, d = X.shape
    if gamma is None:
        gamma = 1.0 / d
    t = np.where(y == 1, 1.0, -1.0)
    K = rbf_kernel(X, X, gamma)
    alphas = np.zeros(n)
    b = 0.0
    rng = np.random.default_rng(seed)

    def f(i: int) -> float:
        return float((alphas * t) @ K[:, i] + b)

    passes = 0
    sweeps = 0
    converged = True
    while passes < max_passes:
        sweeps += 1
        if sweeps > max_sweeps:
            converged = False
            break
        changed = 0
        for i in range(n):
            E_i = f(i) - t[i]
            if not ((t[i] * E_i < -tol and alphas[i] < C) or (t[i] * E_i > tol and alphas[i] > 0)):
                continue
            j = int(rng.integers(0, n - 1))
            if j >= i:
                j += 1
            E_j = f(j) - t[j]
            a_i_old, a_j_old = alphas[i], alphas[j]
            if t[i] != t[j]:
                L, H = max(0.0, a_j_old - a_i_old), min(C, C + a_j_old - a_i_old)
            else:
                L, H = max(0.0, a_i_old + a_j_old - C), min(C, a_i_old + a_j_old)
            if L >= H:
                continue
            eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
            if eta >= 0.0:
                continue
            a_j = a_j_old - t[j] * (E_i - E_j) / eta
            a_j = min(H, max(L, a_j))
            if abs(a_j - a_j_old) < 1e-7:
                continue
            a_i = a_i_old + t[i] * t[j] * (a_j_old - a_j)
            alphas[i], alphas[j] = a_i, a_j
            b1 = b - E_i - t[i] * (a_i - a_i_old) * K[i, i] - t[j] * (a_j - a_j_old) * K[i, j]
            b2 = b - E_j - t[i] * (a_i - a_i_old) * K[i, j] - t[j] * (a_j - a_j_old) * K[j, j]
            if 0.0 < a_i < C:
                b = b1
            elif 0.0 < a_j < C:
                b = b2
            else:
                b = (b1 + b2) / 2.0
            changed += 1
        passes = passes + 1 if changed == 0 else 0
    support = alphas > 1e-10
    return SvmModel(
        X[support].copy(),
        (alphas * t)[support].copy(),
        float(b),
        gamma,
        C,
        {"C": C, "gamma": gamma, "tol": tol, "max_passes": max_passes, "seed": seed},
        {
            "converged": converged,
            "sweeps": sweeps,
            "n_support": int(support.sum()),
            "alphas": alphas.copy(),
            "dual_objective": svm_dual_objective(alphas, t, K),
            "equality_gap": float(abs((alphas * t).sum())),
        },
    )
