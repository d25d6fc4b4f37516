"""Single-hidden-layer autoencoder over item rating columns.

Each item is represented by its column of user ratings, centered by the
training global mean with unobserved entries set to zero.  The column is
projected to a K-dimensional hidden layer (sigmoid) and reconstructed by
a linear output layer; the reconstruction loss counts observed entries
only, with L2 decay on both weight matrices.  Training is mini-batch
gradient descent with momentum over item columns.
"""

from __future__ import annotations

import numpy as np

from ..data import RatingsDataset
from ..errors import ColdStartError, TrainingError
from .base import FallbackStats, Recommender, register


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def reconstruction_loss_and_grads(V, W, mu, b, X, mask, reg, reg_frac):
    """Masked reconstruction loss and exact gradients for one batch.

    ``X`` is (M, B) of centered inputs (zeros where unobserved), ``mask``
    the matching 0/1 observation matrix.  The loss is

        sum(mask * (W sigmoid(V X + mu) + b - X)^2)
        + 0.5 * reg * reg_frac * (|V|^2 + |W|^2)

    where ``reg_frac`` scales the decay term to the batch's share of the
    epoch so a full epoch applies the penalty exactly once.
    """
    Z = V @ X + mu[:, None]
    H = _sigmoid(Z)
    out = W @ H + b[:, None]
    D = (out - X) * mask
    loss = float(np.sum(D * D) + 0.5 * reg * reg_frac
                 * (np.sum(V * V) + np.sum(W * W)))
    g_out = 2.0 * D
    gW = g_out @ H.T + reg * reg_frac * W
    gb = np.sum(g_out, axis=1)
    gH = W.T @ g_out
    gZ = gH * H * (1.0 - H)
    gV = gZ @ X.T + reg * reg_frac * V
    gmu = np.sum(gZ, axis=1)
    return loss, gV, gW, gmu, gb


@register
class ItemAutoencoderModel(Recommender):
    family = "autorec"

    def __init__(self, V, W, mu, b, global_mean, train_data: RatingsDataset,
                 fallback: FallbackStats, loss_history=None):
        super().__init__(fallback)
        self.V = V                      # (K, M) encoder weights
        self.W = W                      # (M, K) decoder weights
        self.mu = mu                    # (K,) hidden biases
        self.b = b                      # (M,) output biases
        self.global_mean = float(global_mean)
        self.ratings_view = train_data
        self.loss_history = list(loss_history or [])
        order = np.argsort(train_data.items, kind="stable")
        self._col_users = train_data.users[order]
        self._col_values = train_data.values[order]
        ptr = np.zeros(train_data.N + 1, dtype=np.int64)
        np.cumsum(np.bincount(train_data.items, minlength=train_data.N),
                  out=ptr[1:])
        self._col_ptr = ptr

    @property
    def K(self) -> int:
        return self.V.shape[0]

    @staticmethod
    def train(train_data: RatingsDataset, hidden: int, reg: float = 0.5,
              epochs: int = 60, lr: float = 0.05, batch_items: int = 128,
              momentum: float = 0.9, seed: int = 0) -> "ItemAutoencoderModel":
        rng = np.random.default_rng(seed)
        M, N, K = train_data.M, train_data.N, int(hidden)
        mean = train_data.global_mean()
        X_full = np.zeros((M, N), dtype=np.float64)
        mask_full = np.zeros((M, N), dtype=np.float64)
        X_full[train_data.users, train_data.items] = train_data.values - mean
        mask_full[train_data.users, train_data.items] = 1.0
        cols = np.flatnonzero(mask_full.sum(axis=0) > 0)

        limit_v = np.sqrt(6.0 / (M + K))
        V = rng.uniform(-limit_v, limit_v, size=(K, M))
        W = rng.uniform(-limit_v, limit_v, size=(M, K))
        mu = np.zeros(K)
        b = np.zeros(M)
        vel = [np.zeros_like(p) for p in (V, W, mu, b)]

        loss_history = []
        for epoch in range(epochs):
            order = rng.permutation(len(cols))
            epoch_loss = 0.0
            for lo in range(0, len(cols), batch_items):
                batch = cols[order[lo:lo + batch_items]]
                Xb = X_full[:, batch]
                Mb = mask_full[:, batch]
                n_obs = max(Mb.sum(), 1.0)
                reg_frac = len(batch) / len(cols)
                loss, gV, gW, gmu, gb = reconstruction_loss_and_grads(
                    V, W, mu, b, Xb, Mb, reg, reg_frac)
                if not np.isfinite(loss):
                    raise TrainingError(
                        f"autoencoder loss diverged at epoch {epoch}")
                epoch_loss += loss
                for p, v, g in zip((V, W, mu, b), vel, (gV, gW, gmu, gb)):
                    v *= momentum
                    v -= (lr / n_obs) * g
                    p += v
            loss_history.append(epoch_loss)
        return ItemAutoencoderModel(V, W, mu, b, mean, train_data,
                                    FallbackStats.from_dataset(train_data),
                                    loss_history)

    def _hidden(self, i: int) -> np.ndarray:
        lo, hi = self._col_ptr[i], self._col_ptr[i + 1]
        us = self._col_users[lo:hi]
        vals = self._col_values[lo:hi] - self.global_mean
        return _sigmoid(self.V[:, us] @ vals + self.mu)

    def raw_score(self, u: int, i: int) -> float:
        M, N = self.W.shape[0], len(self._col_ptr) - 1
        if not (0 <= u < M) or not (0 <= i < N):
            raise ColdStartError(u, i, "index outside training space")
        if self._col_ptr[i] == self._col_ptr[i + 1]:
            raise ColdStartError(u, i, "item unseen in training")
        h = self._hidden(i)
        return float(self.W[u] @ h + self.b[u] + self.global_mean)

    def predict_many(self, users, items) -> np.ndarray:
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        scores = np.empty(len(users), dtype=np.float64)
        order = np.argsort(items, kind="stable")
        k = 0
        while k < len(order):
            j = k
            i = items[order[k]]
            while j < len(order) and items[order[j]] == i:
                j += 1
            sel = order[k:j]
            if self._col_ptr[i] == self._col_ptr[i + 1]:
                scores[sel] = [self.fallback.resolve(int(u), int(i))
                               for u in users[sel]]
            else:
                h = self._hidden(int(i))
                scores[sel] = self.W[users[sel]] @ h + self.b[users[sel]] \
                    + self.global_mean
            k = j
        return np.clip(scores, 1.0, 5.0)

    def _state(self):
        tr = self.ratings_view
        meta = {"global_mean": self.global_mean,
                "loss_history": self.loss_history}
        arrays = {
            "V": self.V, "W": self.W, "mu": self.mu, "b": self.b,
            "tr_users": tr.users, "tr_items": tr.items, "tr_values": tr.values,
            "dims": np.array([tr.M, tr.N], dtype=np.int64),
        }
        return meta, arrays

    @classmethod
    def _from_state(cls, meta, arrays):
        from .neighborhood import _skeleton_dataset
        M, N = (int(x) for x in arrays["dims"])
        train = _skeleton_dataset(arrays["tr_users"], arrays["tr_items"],
                                  arrays["tr_values"], M, N)
        return cls(arrays["V"], arrays["W"], arrays["mu"], arrays["b"],
                   meta["global_mean"], train,
                   FallbackStats.from_dataset(train), meta["loss_history"])
