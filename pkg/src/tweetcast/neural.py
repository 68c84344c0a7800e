"""Small feed-forward regressor with rectifier hiddens and verified gradients.

Training is plain mini-batch gradient descent on mean squared error over
standardized targets. Batches are contiguous chronological blocks by
default so runs are deterministic and respect time order; seeded shuffling
is available. A finite-difference gradient check over every parameter
backs the backpropagation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotStandardizedError, NumericalError


class DivergenceError(NumericalError):
    pass


class DeadNetworkError(NumericalError):
    pass


@dataclass
class MlpModel:
    sizes: tuple  # layer widths, input to output
    weights: list  # W[l]: sizes[l] x sizes[l+1]
    biases: list  # b[l]: sizes[l+1]
    y_mean: float
    y_std: float
    loss_trace: tuple = ()  # per-epoch mean training loss (standardized space)
    flags: dict = field(default_factory=dict)

    def forward(self, X: np.ndarray):
        """Activations per layer; hidden layers rectified, output linear."""
        acts = [np.asarray(X, dtype=float)]
        a = acts[0]
        last = len(self.weights) - 1
        for layer, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            a = z if layer == last else np.maximum(z, 0.0)
            acts.append(a)
        return acts

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = self.forward(X)[-1][:, 0]
        return out * self.y_std + self.y_mean

    def decision_scores(self, X) -> np.ndarray:
        return self.predict(X)


def _loss_and_grads(model: MlpModel, X: np.ndarray, y_std_space: np.ndarray):
    """MSE in standardized-target space, with gradients for every parameter."""
    acts = model.forward(X)
    pred = acts[-1][:, 0]
    n = len(y_std_space)
    resid = pred - y_std_space
    loss = float(np.mean(resid**2))
    grad_out = (2.0 / n) * resid[:, None]
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    delta = grad_out
    for layer in range(len(model.weights) - 1, -1, -1):
        a_prev = acts[layer]
        grads_w[layer] = a_prev.T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer].T) * (acts[layer] > 0.0)
    return loss, grads_w, grads_b


def fit_mlp(
    X: np.ndarray,
    y: np.ndarray,
    hidden: tuple = (32, 16),
    lr: float = 0.01,
    epochs: int = 200,
    batch_size: int = 32,
    seed: int = 42,
    shuffle: bool = False,
    standardized: bool = False,
) -> MlpModel:
    """Train the regressor; inputs must be pre-standardized.

    Targets are standardized internally and restored at prediction.
    Weights start at N(0, 1/fan_in) from the seeded generator. Raises
    DivergenceError when the epoch loss exceeds 1e6 times the initial
    loss, and DeadNetworkError if every hidden unit stops activating.
    """
    if not standardized:
        raise NotStandardizedError("mlp requires standardized features")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    y_mean = float(y.mean())
    y_std = float(y.std())
    if y_std == 0.0:
        y_std = 1.0
    t = (y - y_mean) / y_std
    sizes = (d, *hidden, 1)
    rng = np.random.default_rng(seed)
    weights = [
        rng.normal(0.0, 1.0 / np.sqrt(sizes[l]), size=(sizes[l], sizes[l + 1]))
        for l in range(len(sizes) - 1)
    ]
    biases = [np.zeros(sizes[l + 1]) for l in range(len(sizes) - 1)]
    model = MlpModel(sizes, weights, biases, y_mean, y_std)

    starts = list(range(0, n, batch_size))
    initial_loss, _, _ = _loss_and_grads(model, X, t)
    trace = []
    for _ in range(epochs):
        order = rng.permutation(n) if shuffle else np.arange(n)
        for s in starts:
            idx = order[s : s + batch_size]
            _, gw, gb = _loss_and_grads(model, X[idx], t[idx])
            for layer in range(len(weights)):
                weights[layer] -= lr * gw[layer]
                biases[layer] -= lr * gb[layer]
        epoch_loss, _, _ = _loss_and_grads(model, X, t)
        trace.append(epoch_loss)
        if epoch_loss > 1e6 * max(initial_loss, 1e-12):
            raise DivergenceError(
                f"training diverged: loss {epoch_loss:.3g} vs initial {initial_loss:.3g}"
            )
        if hidden:
            acts = model.forward(X)
            dead = all(bool(np.all(acts[h + 1] <= 0.0)) for h in range(len(hidden)))
            if dead:
                raise DeadNetworkError("all hidden units inactive on the training set")
    acts = model.forward(X)
    dead_units = sum(
        int(np.sum(np.all(acts[h + 1] <= 0.0, axis=0))) for h in range(len(hidden))
    )
    model.loss_trace = tuple(trace)
    model.flags = {"dead_units": dead_units, "epochs": epochs, "lr": lr, "seed": seed}
    return model


def gradient_check(model: MlpModel, X_batch: np.ndarray, y_batch: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error of backprop vs central finite differences.

    Perturbs every weight and bias; targets are standardized with the
    model's own parameters so both paths see the same loss surface.
    """
    X_batch = np.asarray(X_batch, dtype=float)
    if X_batch.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    t = (np.asarray(y_batch, dtype=float) - model.y_mean) / model.y_std
    _, grads_w, grads_b = _loss_and_grads(model, X_batch, t)
    worst = 0.0

    def fd(param_array, analytic):
        nonlocal worst
        flat = param_array.ravel()
        ana = analytic.ravel()
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            up, _, _ = _loss_and_grads(model, X_batch, t)
            flat[i] = original - h
            down, _, _ = _loss_and_grads(model, X_batch, t)
            flat[i] = original
            numeric = (up - down) / (2.0 * h)
            denom = max(abs(numeric) + abs(ana[i]), 1e-8)
            worst = max(worst, abs(numeric - ana[i]) / denom)

    for layer in range(len(model.weights)):
        fd(model.weights[layer], grads_w[layer])
        fd(model.biases[layer], grads_b[layer])
    return worst
