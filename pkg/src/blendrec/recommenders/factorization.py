"""Bias-free matrix factorization trained by SGD.

The score of (u, i) is the plain dot product of the user and item factor
vectors.  Training minimizes squared error over observed ratings with L2
weight decay; each epoch visits ratings in a freshly shuffled order drawn
from the model seed, so training is deterministic.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..data import RatingsDataset
from ..errors import ColdStartError
from .base import FallbackStats, Recommender, register


@njit(cache=True)
def _sgd_epoch(P, Q, users, items, values, order, lr, reg):
    F = P.shape[1]
    for t in range(order.shape[0]):
        k = order[t]
        u = users[k]
        i = items[k]
        dot = 0.0
        for f in range(F):
            dot += P[u, f] * Q[i, f]
        err = values[k] - dot
        for f in range(F):
            puf = P[u, f]
            P[u, f] = puf + lr * (err * Q[i, f] - reg * puf)
            Q[i, f] = Q[i, f] + lr * (err * puf - reg * Q[i, f])


def _objective(P, Q, users, items, values, reg) -> float:
    """Mean squared error over observed ratings plus the decay penalty."""
    preds = np.einsum("ij,ij->i", P[users], Q[items])
    err = values - preds
    penalty = reg * (np.sum(P[users] ** 2) + np.sum(Q[items] ** 2))
    return float((err @ err + penalty) / len(values))


@register
class LatentFactorModel(Recommender):
    family = "svd"

    def __init__(self, P, Q, trained_users, trained_items,
                 fallback: FallbackStats, loss_history=None):
        super().__init__(fallback)
        self.P = P
        self.Q = Q
        self.trained_users = trained_users
        self.trained_items = trained_items
        self.loss_history = list(loss_history or [])

    @property
    def F(self) -> int:
        return self.P.shape[1]

    @staticmethod
    def train(train_data: RatingsDataset, factors: int, lr: float = 0.005,
              reg: float = 0.02, epochs: int = 30, seed: int = 0
              ) -> "LatentFactorModel":
        rng = np.random.default_rng(seed)
        mu = train_data.global_mean()
        # start factor dot products near the global mean
        scale = np.sqrt(max(mu, 1e-12) / factors)
        P = scale + 0.1 * rng.standard_normal((train_data.M, factors))
        Q = scale + 0.1 * rng.standard_normal((train_data.N, factors))
        users = np.ascontiguousarray(train_data.users)
        items = np.ascontiguousarray(train_data.items)
        values = np.ascontiguousarray(train_data.values)
        loss_history = []
        for _ in range(epochs):
            order = rng.permutation(len(values))
            _sgd_epoch(P, Q, users, items, values, order, lr, reg)
            loss_history.append(_objective(P, Q, users, items, values, reg))
        trained_users = np.bincount(users, minlength=train_data.M) > 0
        trained_items = np.bincount(items, minlength=train_data.N) > 0
        return LatentFactorModel(P, Q, trained_users, trained_items,
                                 FallbackStats.from_dataset(train_data),
                                 loss_history)

    def raw_score(self, u: int, i: int) -> float:
        if not (0 <= u < self.P.shape[0]) or not self.trained_users[u]:
            raise ColdStartError(u, i, "user unseen in training")
        if not (0 <= i < self.Q.shape[0]) or not self.trained_items[i]:
            raise ColdStartError(u, i, "item unseen in training")
        return float(self.P[u] @ self.Q[i])

    def predict_many(self, users, items) -> np.ndarray:
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        scores = np.einsum("ij,ij->i", self.P[users], self.Q[items])
        cold = ~(self.trained_users[users] & self.trained_items[items])
        if np.any(cold):
            scores[cold] = [self.fallback.resolve(int(u), int(i))
                            for u, i in zip(users[cold], items[cold])]
        return np.clip(scores, 1.0, 5.0)

    def _state(self):
        meta = {"loss_history": self.loss_history}
        arrays = {
            "P": self.P, "Q": self.Q,
            "trained_users": self.trained_users,
            "trained_items": self.trained_items,
        }
        return meta, arrays

    @classmethod
    def _from_state(cls, meta, arrays):
        return cls(arrays["P"], arrays["Q"], arrays["trained_users"],
                   arrays["trained_items"],
                   FallbackStats(np.zeros(arrays["P"].shape[0]),
                                 np.zeros(arrays["Q"].shape[0]), 0.0),
                   meta["loss_history"])
