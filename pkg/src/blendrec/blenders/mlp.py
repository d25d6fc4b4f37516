"""Multilayer-perceptron blender: sigmoid hidden layers, linear output.

Trained by mini-batch gradient descent on mean squared error over
standardized features, with the learning rate halved when the epoch loss
plateaus.  ``loss_and_grads`` exposes the exact backprop gradients used
by the optimizer so they can be checked against finite differences.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError, TrainingError
from .base import BlenderModel, Standardizer, register_blender


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(weights, biases, X: np.ndarray) -> np.ndarray:
    """Network output for standardized inputs."""
    A = X
    last = len(weights) - 1
    for l, (W, b) in enumerate(zip(weights, biases)):
        Z = A @ W + b
        A = Z if l == last else _sigmoid(Z)
    return A[:, 0]


def loss_and_grads(weights, biases, X: np.ndarray, y: np.ndarray):
    """Mean-squared-error loss and its exact gradients on one batch."""
    acts = [X]
    A = X
    last = len(weights) - 1
    for l, (W, b) in enumerate(zip(weights, biases)):
        Z = A @ W + b
        A = Z if l == last else _sigmoid(Z)
        acts.append(A)
    pred = acts[-1][:, 0]
    err = pred - y
    n = len(y)
    loss = float(err @ err / n)

    g_weights = [None] * len(weights)
    g_biases = [None] * len(biases)
    delta = (2.0 / n) * err[:, None]
    for l in range(last, -1, -1):
        g_weights[l] = acts[l].T @ delta
        g_biases[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ weights[l].T) * acts[l] * (1.0 - acts[l])
    return loss, g_weights, g_biases


def init_params(n_features: int, layer_sizes, seed: int):
    """Glorot hidden layers; zero output weights, zero output bias."""
    rng = np.random.default_rng(seed)
    dims = [n_features] + list(layer_sizes) + [1]
    weights, biases = [], []
    for l in range(len(dims) - 1):
        fan_in, fan_out = dims[l], dims[l + 1]
        if l == len(dims) - 2:
            W = np.zeros((fan_in, fan_out))
        else:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            W = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        weights.append(W)
        biases.append(np.zeros(fan_out))
    return weights, biases


@register_blender
class MlpBlenderModel(BlenderModel):
    family = "mlp"

    def __init__(self, weights, biases, layer_sizes,
                 standardizer: Standardizer, warnings=None):
        super().__init__(n_features=weights[0].shape[0], warnings=warnings)
        self.weights = [np.asarray(W, dtype=np.float64) for W in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.layer_sizes = list(layer_sizes)
        self.standardizer = standardizer

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        X = self._check_features(X)
        preds = forward(self.weights, self.biases,
                        self.standardizer.transform(X))
        return np.clip(preds, 1.0, 5.0)

    def _state(self) -> dict:
        return {
            "layer_sizes": self.layer_sizes,
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "standardizer": {"mean": self.standardizer.mean.tolist(),
                             "std": self.standardizer.std.tolist()},
        }

    @classmethod
    def _from_state(cls, state: dict) -> "MlpBlenderModel":
        return cls([np.array(W) for W in state["weights"]],
                   [np.array(b) for b in state["biases"]],
                   state["layer_sizes"],
                   Standardizer(np.array(state["standardizer"]["mean"]),
                                np.array(state["standardizer"]["std"])))


def fit_mlp_blender(X: np.ndarray, y: np.ndarray, layer_sizes, seed: int = 0,
                    epochs: int = 200, batch_size: int = 128,
                    lr: float = 0.01, plateau_patience: int = 8,
                    lr_decay: float = 0.5) -> MlpBlenderModel:
    """Train the blender for a fixed epoch budget; deterministic per seed."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not 1 <= len(layer_sizes) <= 3:
        raise InvalidArgumentError("hidden layer count must be 1..3")
    standardizer = Standardizer.fit(X)
    Xs = standardizer.transform(X)
    weights, biases = init_params(X.shape[1], layer_sizes, seed)
    biases[-1][0] = y.mean() if len(y) else 0.0

    rng = np.random.default_rng(seed)
    n = len(y)
    best = np.inf
    stall = 0
    rate = lr
    for epoch in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for lo in range(0, n, batch_size):
            sel = order[lo:lo + batch_size]
            loss, gW, gb = loss_and_grads(weights, biases, Xs[sel], y[sel])
            if not np.isfinite(loss):
                raise TrainingError(f"mlp blender diverged at epoch {epoch}")
            epoch_loss += loss * len(sel)
            for l in range(len(weights)):
                weights[l] -= rate * gW[l]
                biases[l] -= rate * gb[l]
        epoch_loss /= n
        if epoch_loss < best - 1e-6:
            best = epoch_loss
            stall = 0
        else:
            stall += 1
            if stall >= plateau_patience:
                rate *= lr_decay
                stall = 0
    return MlpBlenderModel(weights, biases, layer_sizes, standardizer)
