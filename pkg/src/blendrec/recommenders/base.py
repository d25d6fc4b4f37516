"""Shared recommender machinery: spec, fallback chain, model registry."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..data import RATING_MAX, RATING_MIN, RatingsDataset
from ..errors import ColdStartError, InvalidArgumentError

FAMILIES = ("ubcf", "ibcf", "svd", "autorec", "rfcb", "user_avg", "movie_avg")


def clamp(score: float) -> float:
    """Clip a raw score to the valid rating range."""
    return float(min(max(score, RATING_MIN), RATING_MAX))


@dataclass(frozen=True)
class RecommenderSpec:
    """One recommender instance: family name, hyper-parameters, seed."""

    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgumentError(
                f"unknown family {self.family!r}; valid: {', '.join(FAMILIES)}")
        for key, val in self.params.items():
            if isinstance(val, (int, float)) and not isinstance(val, bool):
                if val is not None and val <= 0:
                    raise InvalidArgumentError(
                        f"{self.family}: hyper-parameter {key}={val} must be positive")

    def label(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.family}({inner})"


class FallbackStats:
    """Mean-based fallback chain: user mean, then item mean, then global.

    Built from the same training fold as the model it backs, so resolving
    a cold start never looks at held-out ratings.
    """

    def __init__(self, user_means, item_means, global_mean):
        self.user_means = np.asarray(user_means, dtype=np.float64)
        self.item_means = np.asarray(item_means, dtype=np.float64)
        self.global_mean = float(global_mean)

    @staticmethod
    def from_dataset(train_data: RatingsDataset) -> "FallbackStats":
        M, N = train_data.M, train_data.N
        u_cnt = np.bincount(train_data.users, minlength=M)
        i_cnt = np.bincount(train_data.items, minlength=N)
        u_sum = np.bincount(train_data.users, weights=train_data.values, minlength=M)
        i_sum = np.bincount(train_data.items, weights=train_data.values, minlength=N)
        with np.errstate(invalid="ignore", divide="ignore"):
            user_means = np.where(u_cnt > 0, u_sum / np.maximum(u_cnt, 1), np.nan)
            item_means = np.where(i_cnt > 0, i_sum / np.maximum(i_cnt, 1), np.nan)
        return FallbackStats(user_means, item_means, train_data.global_mean())

    def resolve(self, u: int, i: int) -> float:
        if 0 <= u < len(self.user_means) and np.isfinite(self.user_means[u]):
            return float(self.user_means[u])
        if 0 <= i < len(self.item_means) and np.isfinite(self.item_means[i]):
            return float(self.item_means[i])
        return self.global_mean


class Recommender:
    """Base class: family prediction plus a total, clamped ``predict``."""

    family: str = "?"

    def __init__(self, fallback: FallbackStats):
        self.fallback = fallback

    def raw_score(self, u: int, i: int) -> float:
        """Family-specific score before clamping; raises ColdStartError."""
        raise NotImplementedError

    def predict(self, u: int, i: int) -> float:
        """Clamped score, falling back through train-fold means; total."""
        try:
            return clamp(self.raw_score(u, i))
        except ColdStartError:
            return clamp(self.fallback.resolve(u, i))

    def predict_many(self, users, items) -> np.ndarray:
        users = np.asarray(users)
        items = np.asarray(items)
        return np.array([self.predict(int(u), int(i))
                         for u, i in zip(users, items)], dtype=np.float64)

    def rank(self, u: int, candidates) -> list[int]:
        """Candidates sorted by predicted score desc, then item index asc."""
        scored = [(-self.predict(u, int(i)), int(i)) for i in candidates]
        scored.sort()
        return [i for _, i in scored]

    # ---- serialization -------------------------------------------------

    def _state(self):
        """(meta dict, arrays dict) capturing the model losslessly."""
        raise NotImplementedError

    @classmethod
    def _from_state(cls, meta, arrays):
        raise NotImplementedError

    def save(self, path) -> None:
        meta, arrays = self._state()
        meta = dict(meta)
        meta["fallback_global_mean"] = self.fallback.global_mean
        payload = {f"a__{k}": v for k, v in arrays.items()}
        payload["fb__user_means"] = self.fallback.user_means
        payload["fb__item_means"] = self.fallback.item_means
        np.savez(path,
                 family=np.array(self.family),
                 version=np.array(1),
                 meta=np.array(json.dumps(meta, sort_keys=True)),
                 **payload)


_REGISTRY: dict[str, type] = {}


def register(cls):
    _REGISTRY[cls.family] = cls
    return cls


def load_model(path) -> Recommender:
    """Load any saved recommender, dispatching on its family tag."""
    with np.load(path, allow_pickle=False) as data:
        family = str(data["family"])
        meta = json.loads(str(data["meta"]))
        arrays = {k[3:]: data[k] for k in data.files if k.startswith("a__")}
        fallback = FallbackStats(data["fb__user_means"], data["fb__item_means"],
                                 meta.pop("fallback_global_mean"))
    cls = _REGISTRY.get(family)
    if cls is None:
        raise InvalidArgumentError(f"unknown model family {family!r} in {path}")
    model = cls._from_state(meta, arrays)
    model.fallback = fallback
    return model


def rank_recommendations(model: Recommender, u: int, candidates) -> list[int]:
    """Module-level alias for :meth:`Recommender.rank`."""
    return model.rank(u, candidates)
