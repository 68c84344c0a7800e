"""Linear models: OLS, ridge, lasso, and logistic regression.

All fits include an unpenalized intercept. OLS and ridge solve their
normal equations by Cholesky factorization (with a tiny diagonal jitter
retry for singular systems, flagged on the model); lasso runs cyclic
coordinate descent with soft-thresholding; logistic regression runs
full-batch gradient descent with a backtracking line search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NotStandardizedError, NumericalError, SingleClassError

OLS = "ols"
RIDGE = "ridge"
LASSO = "lasso"
LOGISTIC = "logistic"

JITTER = 1e-8


class NegativeLambda(ValueError):
    pass


@dataclass
class LinearModel:
    weights: np.ndarray
    intercept: float
    family: str
    hyperparams: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def decision_scores(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return X @ self.weights + self.intercept

    def predict_proba(self, X) -> np.ndarray:
        if self.family != LOGISTIC:
            raise ValueError(f"{self.family} has no probabilities")
        return _sigmoid(self.decision_scores(X))

    def predict(self, X) -> np.ndarray:
        if self.family == LOGISTIC:
            return (self.predict_proba(X) >= 0.5).astype(int)
        return self.decision_scores(X)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _chol_solve(G: np.ndarray, rhs: np.ndarray):
    """Solve G x = rhs with Cholesky; jitter retry on singular G.

    Returns (x, jittered). Raises NumericalError when even the jittered
    system fails to factor.
    """
    try:
        L = np.linalg.cholesky(G)
        jittered = False
    except np.linalg.LinAlgError:
        try:
            L = np.linalg.cholesky(G + JITTER * np.trace(G) * np.eye(G.shape[0]))
            jittered = True
        except np.linalg.LinAlgError as exc:
            raise NumericalError("normal equations not positive definite after jitter") from exc
    x = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
    return x, jittered


def fit_ols(X: np.ndarray, y: np.ndarray) -> LinearModel:
    """Least squares with intercept via the normal equations."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.hstack([X, np.ones((X.shape[0], 1))])
    G = A.T @ A
    coef, jittered = _chol_solve(G, A.T @ y)
    return LinearModel(coef[:-1], float(coef[-1]), OLS, {}, {"jittered": jittered})


def fit_ridge(X: np.ndarray, y: np.ndarray, lam: float) -> LinearModel:
    """Ridge regression on centered data; the intercept is not penalized."""
    if lam < 0:
        raise NegativeLambda(f"lambda must be >= 0, got {lam}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    Xc = X - x_mean
    G = Xc.T @ Xc + lam * np.eye(X.shape[1])
    w, jittered = _chol_solve(G, Xc.T @ (y - y_mean))
    intercept = y_mean - float(x_mean @ w)
    return LinearModel(w, intercept, RIDGE, {"lambda": lam}, {"jittered": jittered})


def soft_threshold(x: float, lam: float) -> float:
    if x > lam:
        return x - lam
    if x < -lam:
        return x + lam
    return 0.0


def lasso_lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest lambda for which the lasso solution is all zeros."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.max(np.abs(X.T @ (y - y.mean())))) / len(y)


def fit_lasso(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float = 1e-6,
    max_iter: int = 10000,
    standardized: bool = False,
) -> LinearModel:
    """Cyclic coordinate descent on (1/2n)||y - Xw - b||^2 + lam*||w||_1.

    Inputs must be standardized (coordinate thresholds are scale
    sensitive); callers assert this with the ``standardized`` flag.
    The intercept refreshes once per sweep and is not penalized. If the
    sweep cap is hit the last iterate is returned with
    ``flags["converged"] = False``.
    """
    if lam < 0:
        raise NegativeLambda(f"lambda must be >= 0, got {lam}")
    if not standardized:
        raise NotStandardizedError("lasso requires standardized features (pass standardized=True)")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    col_sq = (X * X).sum(axis=0) / n
    w = np.zeros(d)
    b = float(y.mean())
    r = y - b  # residual y - Xw - b
    converged = False
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        max_change = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            xj = X[:, j]
            rho = (xj @ r) / n + col_sq[j] * w[j]
            w_new = soft_threshold(rho, lam) / col_sq[j]
            delta = w_new - w[j]
            if delta != 0.0:
                r -= xj * delta
                w[j] = w_new
                max_change = max(max_change, abs(delta))
        b_delta = float(r.mean())
        if b_delta != 0.0:
            b += b_delta
            r -= b_delta
            max_change = max(max_change, abs(b_delta))
        if max_change < tol:
            converged = True
            break
    return LinearModel(
        w, b, LASSO, {"lambda": lam}, {"converged": converged, "sweeps": sweeps}
    )


def lasso_kkt_gap(X: np.ndarray, y: np.ndarray, model: LinearModel, lam: float) -> float:
    """Largest violation of the lasso stationarity conditions.

    For zero weights |x_j.r|/n may not exceed lam; for active weights
    x_j.r/n must equal lam*sign(w_j). Returns the worst absolute slack.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    r = y - X @ model.weights - model.intercept
    corr = X.T @ r / n
    gap = 0.0
    for j, wj in enumerate(model.weights):
        if wj == 0.0:
            gap = max(gap, abs(corr[j]) - lam)
        else:
            gap = max(gap, abs(corr[j] - lam * math.copysign(1.0, wj)))
    return float(gap)


def logistic_loss_and_grad(
    w: np.ndarray,
    b: float,
    X: np.ndarray,
    y: np.ndarray,
    l2: float = 0.0,
    sample_weight: np.ndarray | None = None,
):
    """Weighted negative log-likelihood plus (l2/2)||w||^2, with gradients."""
    z = X @ w + b
    c = np.ones(len(y)) if sample_weight is None else sample_weight
    # softplus(z) - y*z summed with weights, computed stably
    loss = float(np.sum(c * (np.logaddexp(0.0, z) - y * z)) + 0.5 * l2 * (w @ w))
    err = c * (_sigmoid(z) - y)
    grad_w = X.T @ err + l2 * w
    grad_b = float(np.sum(err))
    return loss, grad_w, grad_b


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    l2: float = 0.0,
    class_weight: str | None = None,
    tol: float = 1e-8,
    max_iter: int = 5000,
) -> LinearModel:
    """Logistic regression by gradient descent with backtracking line search.

    ``class_weight="balanced"`` weights each example by n/(2*n_class).
    Stops when the gradient infinity-norm drops below ``tol``; otherwise
    returns the last iterate with ``flags["converged"] = False``.
    """
    if l2 < 0:
        raise NegativeLambda(f"l2 must be >= 0, got {l2}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    classes = np.unique(y)
    if not np.isin(classes, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")
    if len(classes) < 2:
        raise SingleClassError("logistic regression needs both classes")
    n = len(y)
    if class_weight == "balanced":
        n_pos = float(np.sum(y == 1))
        n_neg = n - n_pos
        cw = np.where(y == 1, n / (2.0 * n_pos), n / (2.0 * n_neg))
    elif class_weight in (None, "none"):
        cw = None
    else:
        raise ValueError(f"unknown class_weight {class_weight!r}")

    w = np.zeros(X.shape[1])
    b = 0.0
    loss, grad_w, grad_b = logistic_loss_and_grad(w, b, X, y, l2, cw)
    converged = False
    iterations = 0
    step = 1.0 / max(1.0, float(np.abs(X).max()) ** 2 * n)  # conservative opener
    for iterations in range(1, max_iter + 1):
        gnorm = max(float(np.max(np.abs(grad_w))), abs(grad_b))
        if gnorm < tol:
            converged = True
            break
        g_sq = float(grad_w @ grad_w) + grad_b * grad_b
        alpha = max(step * 4.0, 1e-12)  # warm-started step size
        while True:
            w_new = w - alpha * grad_w
            b_new = b - alpha * grad_b
            loss_new, gw_new, gb_new = logistic_loss_and_grad(w_new, b_new, X, y, l2, cw)
            if loss_new <= loss - 1e-4 * alpha * g_sq or alpha < 1e-18:
                break
            alpha *= 0.5
        step = alpha
        w, b, loss, grad_w, grad_b = w_new, b_new, loss_new, gw_new, gb_new
    return LinearModel(
        w,
        float(b),
        LOGISTIC,
        {"l2": l2, "class_weight": class_weight or "none"},
        {"converged": converged, "iterations": iterations},
    )
