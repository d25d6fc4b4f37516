"""User-based and item-based k-NN rating prediction.

User-user similarity is the Pearson correlation over co-rated items,
computed in the moment form ``(n*Sxy - Sx*Sy) / sqrt((n*Sxx - Sx^2) *
(n*Syy - Sy^2))`` which is exact in float64 for integer ratings.
Item-item similarity is the adjusted cosine over user-mean-centered
ratings.  Pairs with fewer than ``MIN_OVERLAP`` co-ratings, or with zero
variance on either side, get similarity 0 and never enter a
neighborhood.
"""

from __future__ import annotations

import numpy as np

from ..data import RatingsDataset
from ..errors import ColdStartError
from .base import FallbackStats, Recommender, register

MIN_OVERLAP = 2
# Item neighborhoods keep positive similarities only; the threshold guards
# against float noise flipping a mathematically-zero similarity positive.
POSITIVE_SIM_EPS = 1e-8

_BLOCK = 1024


def _dense_matrices(train_data: RatingsDataset):
    """(values matrix X, mask B) with zeros at unrated cells."""
    X = np.zeros((train_data.M, train_data.N), dtype=np.float64)
    B = np.zeros((train_data.M, train_data.N), dtype=np.float64)
    X[train_data.users, train_data.items] = train_data.values
    B[train_data.users, train_data.items] = 1.0
    return X, B


def _csr_groups(keys: np.ndarray, count: int, *cols):
    """Group parallel arrays by key; returns (ptr, sorted column arrays)."""
    order = np.argsort(keys, kind="stable")
    ptr = np.zeros(count + 1, dtype=np.int64)
    np.cumsum(np.bincount(keys, minlength=count), out=ptr[1:])
    return ptr, [c[order] for c in cols]


def user_pearson_matrix(train_data: RatingsDataset) -> np.ndarray:
    """Dense M x M Pearson similarity over co-rated items."""
    X, B = _dense_matrices(train_data)
    X2 = X * X
    M = train_data.M
    sim = np.zeros((M, M), dtype=np.float64)
    for lo in range(0, M, _BLOCK):
        hi = min(lo + _BLOCK, M)
        n = B[lo:hi] @ B.T
        s = X[lo:hi] @ X.T
        su = X[lo:hi] @ B.T
        sv = B[lo:hi] @ X.T
        du = n * (X2[lo:hi] @ B.T) - su * su
        dv = n * (B[lo:hi] @ X2.T) - sv * sv
        num = n * s - su * sv
        den = du * dv
        valid = (n >= MIN_OVERLAP) & (du > 0) & (dv > 0)
        blk = np.zeros_like(num)
        np.divide(num, np.sqrt(den, where=valid, out=np.ones_like(den)),
                  where=valid, out=blk)
        sim[lo:hi] = np.clip(blk, -1.0, 1.0)
    np.fill_diagonal(sim, 0.0)
    return sim


def item_adjusted_cosine_matrix(train_data: RatingsDataset) -> np.ndarray:
    """Dense N x N adjusted-cosine similarity over co-rating users."""
    X, B = _dense_matrices(train_data)
    counts = np.bincount(train_data.users, minlength=train_data.M)
    sums = np.bincount(train_data.users, weights=train_data.values,
                       minlength=train_data.M)
    means = sums / np.maximum(counts, 1)
    D = (X - means[:, None]) * B
    D2 = D * D
    N = train_data.N
    sim = np.zeros((N, N), dtype=np.float64)
    for lo in range(0, N, _BLOCK):
        hi = min(lo + _BLOCK, N)
        n = B.T[lo:hi] @ B
        num = D.T[lo:hi] @ D
        sq_i = D2.T[lo:hi] @ B           # sum of d_i^2 over co-raters
        sq_j = B.T[lo:hi] @ D2           # sum of d_j^2 over co-raters
        valid = (n >= MIN_OVERLAP) & (sq_i > 0) & (sq_j > 0)
        den = sq_i * sq_j
        blk = np.zeros_like(num)
        np.divide(num, np.sqrt(den, where=valid, out=np.ones_like(den)),
                  where=valid, out=blk)
        sim[lo:hi] = np.clip(blk, -1.0, 1.0)
    np.fill_diagonal(sim, 0.0)
    return sim


def _top_by_similarity(sims: np.ndarray, indices: np.ndarray, k: int):
    """Indices of the k most similar entries; ties broken by ascending id."""
    if len(sims) <= k:
        order = np.lexsort((indices, -sims))
        return order
    return np.lexsort((indices, -sims))[:k]


@register
class UserNeighborhoodModel(Recommender):
    """Weighted deviation-from-mean prediction over similar users."""

    family = "ubcf"

    def __init__(self, similarities, user_means, neighborhood_size,
                 train_data: RatingsDataset, fallback: FallbackStats):
        super().__init__(fallback)
        self.similarities = similarities
        self.user_means = user_means
        self.neighborhood_size = int(neighborhood_size)
        self.ratings_view = train_data
        self._item_ptr, (self._item_raters, self._item_values) = _csr_groups(
            train_data.items, train_data.N, train_data.users, train_data.values)
        self._user_counts = np.bincount(train_data.users, minlength=train_data.M)

    @staticmethod
    def train(train_data: RatingsDataset, neighbors: int) -> "UserNeighborhoodModel":
        sims = user_pearson_matrix(train_data)
        counts = np.bincount(train_data.users, minlength=train_data.M)
        sums = np.bincount(train_data.users, weights=train_data.values,
                           minlength=train_data.M)
        means = sums / np.maximum(counts, 1)
        return UserNeighborhoodModel(sims, means, neighbors, train_data,
                                     FallbackStats.from_dataset(train_data))

    def raw_score(self, u: int, i: int) -> float:
        M, N = len(self.user_means), len(self._item_ptr) - 1
        if not (0 <= u < M) or not (0 <= i < N):
            raise ColdStartError(u, i, "index outside training space")
        if self._user_counts[u] == 0:
            raise ColdStartError(u, i, "user has no training ratings")
        lo, hi = self._item_ptr[i], self._item_ptr[i + 1]
        raters = self._item_raters[lo:hi]
        values = self._item_values[lo:hi]
        keep = (raters != u)
        raters, values = raters[keep], values[keep]
        sims = self.similarities[u, raters]
        nz = sims != 0.0
        if not np.any(nz):
            raise ColdStartError(u, i, "no similar users rated the item")
        raters, values, sims = raters[nz], values[nz], sims[nz]
        top = _top_by_similarity(sims, raters, self.neighborhood_size)
        sims, raters, values = sims[top], raters[top], values[top]
        num = np.sum(sims * (values - self.user_means[raters]))
        den = np.sum(np.abs(sims))
        return float(self.user_means[u] + num / den)

    def _state(self):
        meta = {"neighborhood_size": self.neighborhood_size}
        tr = self.ratings_view
        arrays = {
            "similarities": self.similarities,
            "user_means": self.user_means,
            "tr_users": tr.users, "tr_items": tr.items, "tr_values": tr.values,
            "dims": np.array([tr.M, tr.N], dtype=np.int64),
        }
        return meta, arrays

    @classmethod
    def _from_state(cls, meta, arrays):
        M, N = (int(x) for x in arrays["dims"])
        train = _skeleton_dataset(arrays["tr_users"], arrays["tr_items"],
                                  arrays["tr_values"], M, N)
        return cls(arrays["similarities"], arrays["user_means"],
                   meta["neighborhood_size"], train,
                   FallbackStats.from_dataset(train))


@register
class ItemNeighborhoodModel(Recommender):
    """Similarity-weighted average over a user's own ratings."""

    family = "ibcf"

    def __init__(self, similarities, neighborhood_size,
                 train_data: RatingsDataset, fallback: FallbackStats):
        super().__init__(fallback)
        self.similarities = similarities
        self.neighborhood_size = int(neighborhood_size)
        self.ratings_view = train_data
        self._user_ptr, (self._user_items, self._user_values) = _csr_groups(
            train_data.users, train_data.M, train_data.items, train_data.values)

    @staticmethod
    def train(train_data: RatingsDataset, neighbors: int) -> "ItemNeighborhoodModel":
        sims = item_adjusted_cosine_matrix(train_data)
        return ItemNeighborhoodModel(sims, neighbors, train_data,
                                     FallbackStats.from_dataset(train_data))

    def raw_score(self, u: int, i: int) -> float:
        M, N = len(self._user_ptr) - 1, self.similarities.shape[0]
        if not (0 <= u < M) or not (0 <= i < N):
            raise ColdStartError(u, i, "index outside training space")
        lo, hi = self._user_ptr[u], self._user_ptr[u + 1]
        rated = self._user_items[lo:hi]
        values = self._user_values[lo:hi]
        keep = (rated != i)
        rated, values = rated[keep], values[keep]
        if len(rated) == 0:
            raise ColdStartError(u, i, "user has no training ratings")
        sims = self.similarities[i, rated]
        pos = sims > POSITIVE_SIM_EPS
        if not np.any(pos):
            raise ColdStartError(u, i, "no positively similar rated items")
        rated, values, sims = rated[pos], values[pos], sims[pos]
        top = _top_by_similarity(sims, rated, self.neighborhood_size)
        sims, values = sims[top], values[top]
        return float(np.sum(sims * values) / np.sum(sims))

    def _state(self):
        meta = {"neighborhood_size": self.neighborhood_size}
        tr = self.ratings_view
        arrays = {
            "similarities": self.similarities,
            "tr_users": tr.users, "tr_items": tr.items, "tr_values": tr.values,
            "dims": np.array([tr.M, tr.N], dtype=np.int64),
        }
        return meta, arrays

    @classmethod
    def _from_state(cls, meta, arrays):
        M, N = (int(x) for x in arrays["dims"])
        train = _skeleton_dataset(arrays["tr_users"], arrays["tr_items"],
                                  arrays["tr_values"], M, N)
        return cls(arrays["similarities"], meta["neighborhood_size"], train,
                   FallbackStats.from_dataset(train))


def _skeleton_dataset(users, items, values, M, N) -> RatingsDataset:
    """Rebuild a minimal dataset view from serialized dense-index arrays."""
    user_ids = list(range(1, M + 1))
    item_ids = list(range(1, N + 1))
    return RatingsDataset(users, items, values,
                          np.zeros(len(values), dtype=np.int64),
                          {ext: d for d, ext in enumerate(user_ids)},
                          {ext: d for d, ext in enumerate(item_ids)},
                          user_ids, item_ids)
