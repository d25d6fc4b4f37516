"""Rating-prediction models behind a uniform train/predict interface.

Seven families: two k-NN collaborative filters (user- and item-based), a
latent-factor model, an item autoencoder, per-user genre forests, and
the two mean-rating baselines.  ``train`` dispatches a
:class:`RecommenderSpec` to the right trainer and returns an immutable
model whose ``predict`` is total (cold starts resolve through train-fold
means) and whose ``raw_score`` exposes the family formula pre-clamp.
"""

from __future__ import annotations

from ..data import GenreCatalog, RatingsDataset
from ..errors import MissingInputError, TrainingError
from .autoencoder import ItemAutoencoderModel, reconstruction_loss_and_grads
from .base import (FAMILIES, FallbackStats, Recommender, RecommenderSpec,
                   clamp, load_model, rank_recommendations)
from .baselines import MovieAverageModel, UserAverageModel
from .factorization import LatentFactorModel
from .genre_forest import UserForestModel
from .neighborhood import (ItemNeighborhoodModel, UserNeighborhoodModel,
                           item_adjusted_cosine_matrix, user_pearson_matrix)

__all__ = [
    "FAMILIES", "FallbackStats", "Recommender", "RecommenderSpec",
    "ItemAutoencoderModel", "ItemNeighborhoodModel", "LatentFactorModel",
    "MovieAverageModel", "UserAverageModel", "UserForestModel",
    "UserNeighborhoodModel", "clamp", "item_adjusted_cosine_matrix",
    "load_model", "rank_recommendations", "reconstruction_loss_and_grads",
    "train", "user_pearson_matrix",
]


def train(spec: RecommenderSpec, train_data: RatingsDataset,
          genres: GenreCatalog | None = None) -> Recommender:
    """Train one recommender instance; deterministic given the spec seed."""
    if len(train_data) == 0:
        raise TrainingError(f"{spec.family}: empty training data")
    p = spec.params
    if spec.family == "ubcf":
        return UserNeighborhoodModel.train(train_data,
                                           neighbors=int(p["neighbors"]))
    if spec.family == "ibcf":
        return ItemNeighborhoodModel.train(train_data,
                                           neighbors=int(p["neighbors"]))
    if spec.family == "svd":
        return LatentFactorModel.train(
            train_data, factors=int(p["factors"]),
            lr=float(p.get("lr", 0.005)), reg=float(p.get("reg", 0.02)),
            epochs=int(p.get("epochs", 30)), seed=spec.seed)
    if spec.family == "autorec":
        return ItemAutoencoderModel.train(
            train_data, hidden=int(p["hidden"]),
            reg=float(p.get("reg", 0.5)), epochs=int(p.get("epochs", 60)),
            lr=float(p.get("lr", 0.05)),
            batch_items=int(p.get("batch_items", 128)),
            momentum=float(p.get("momentum", 0.9)), seed=spec.seed)
    if spec.family == "rfcb":
        if genres is None:
            raise MissingInputError("rfcb requires a genre catalog")
        return UserForestModel.train(
            train_data, genres, trees=int(p["trees"]),
            max_depth=int(p.get("max_depth", 0)), seed=spec.seed)
    if spec.family == "user_avg":
        return UserAverageModel.train(train_data)
    if spec.family == "movie_avg":
        return MovieAverageModel.train(train_data)
    raise TrainingError(f"unhandled family {spec.family!r}")
