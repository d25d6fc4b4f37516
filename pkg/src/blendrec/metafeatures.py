"""Per-(user, item) meta-features computed from a training fold.

Four features in fixed column order: user_support, movie_support,
user_average, movie_average.  Supports are raw rating counts; averages
fall back to the training fold's global mean at zero support so the
vector is always fully populated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import RatingsDataset

META_COLUMNS = ("user_support", "movie_support", "user_average", "movie_average")


@dataclass(frozen=True)
class MetaVector:
    user_support: int
    movie_support: int
    user_average: float
    movie_average: float

    def as_array(self) -> np.ndarray:
        return np.array([self.user_support, self.movie_support,
                         self.user_average, self.movie_average],
                        dtype=np.float64)


class MetaTable:
    """Vectorized support/average statistics over one training fold."""

    def __init__(self, train_data: RatingsDataset):
        M, N = train_data.M, train_data.N
        self.user_support = np.bincount(train_data.users, minlength=M)
        self.movie_support = np.bincount(train_data.items, minlength=N)
        user_sums = np.bincount(train_data.users, weights=train_data.values,
                                minlength=M)
        movie_sums = np.bincount(train_data.items, weights=train_data.values,
                                 minlength=N)
        self.global_mean = train_data.global_mean()
        with np.errstate(invalid="ignore", divide="ignore"):
            self.user_average = np.where(self.user_support > 0,
                                         user_sums / self.user_support,
                                         self.global_mean)
            self.movie_average = np.where(self.movie_support > 0,
                                          movie_sums / self.movie_support,
                                          self.global_mean)

    def lookup(self, u: int, i: int) -> MetaVector:
        return MetaVector(
            user_support=int(self.user_support[u]),
            movie_support=int(self.movie_support[i]),
            user_average=float(self.user_average[u]),
            movie_average=float(self.movie_average[i]),
        )

    def rows(self, users: np.ndarray, items: np.ndarray) -> np.ndarray:
        """(n, 4) feature rows for parallel arrays of dense indices."""
        return np.column_stack([
            self.user_support[users].astype(np.float64),
            self.movie_support[items].astype(np.float64),
            self.user_average[users],
            self.movie_average[items],
        ])


def compute_meta(train_data: RatingsDataset, u: int, i: int) -> MetaVector:
    """Meta-features of pair (u, i) computed solely from ``train_data``."""
    return MetaTable(train_data).lookup(u, i)
