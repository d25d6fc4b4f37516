"""User-average and movie-average baseline recommenders."""

from __future__ import annotations

import numpy as np

from ..data import RatingsDataset
from .base import FallbackStats, Recommender, clamp as clampf, register


class _AverageModel(Recommender):
    """Mean-rating lookup; total via the global-mean fallback."""

    def __init__(self, fallback: FallbackStats):
        super().__init__(fallback)

    @property
    def user_means(self):
        return self.fallback.user_means

    @property
    def item_means(self):
        return self.fallback.item_means

    @property
    def global_mean(self):
        return self.fallback.global_mean

    @classmethod
    def train(cls, train_data: RatingsDataset):
        return cls(FallbackStats.from_dataset(train_data))

    def _state(self):
        return {}, {}

    @classmethod
    def _from_state(cls, meta, arrays):
        return cls(FallbackStats(np.zeros(0), np.zeros(0), 0.0))


@register
class UserAverageModel(_AverageModel):
    family = "user_avg"

    def raw_score(self, u: int, i: int) -> float:
        means = self.fallback.user_means
        if 0 <= u < len(means) and np.isfinite(means[u]):
            return float(means[u])
        return self.fallback.global_mean

    def predict_many(self, users, items) -> np.ndarray:
        users = np.asarray(users, dtype=np.int64)
        means = self.fallback.user_means
        if len(means) == 0:
            return np.full(len(users), clampf(self.fallback.global_mean))
        out = np.where((users >= 0) & (users < len(means)),
                       means[np.clip(users, 0, len(means) - 1)], np.nan)
        return np.clip(np.where(np.isfinite(out), out,
                                self.fallback.global_mean), 1.0, 5.0)


@register
class MovieAverageModel(_AverageModel):
    family = "movie_avg"

    def raw_score(self, u: int, i: int) -> float:
        means = self.fallback.item_means
        if 0 <= i < len(means) and np.isfinite(means[i]):
            return float(means[i])
        return self.fallback.global_mean

    def predict_many(self, users, items) -> np.ndarray:
        items = np.asarray(items, dtype=np.int64)
        means = self.fallback.item_means
        if len(means) == 0:
            return np.full(len(items), clampf(self.fallback.global_mean))
        out = np.where((items >= 0) & (items < len(means)),
                       means[np.clip(items, 0, len(means) - 1)], np.nan)
        return np.clip(np.where(np.isfinite(out), out,
                                self.fallback.global_mean), 1.0, 5.0)
