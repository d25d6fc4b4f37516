"""blendrec: hybrid rating prediction via out-of-fold blending.

The library trains a roster of rating predictors under cross-validation,
collects their out-of-fold predictions plus per-pair meta-features into a
blendset, and selects/evaluates a second-level blending model with nested
cross-validation.
"""

from .data import (FoldPlan, GenreCatalog, Rating, RatingsDataset, make_folds,
                   parse_movies, parse_ratings, split, write_ratings)
from .metafeatures import META_COLUMNS, MetaTable, MetaVector, compute_meta
from .recommenders import (FAMILIES, Recommender, RecommenderSpec,
                           rank_recommendations, train)

__version__ = "0.1.0"

__all__ = [
    "FAMILIES", "FoldPlan", "GenreCatalog", "META_COLUMNS", "MetaTable",
    "MetaVector", "Rating", "RatingsDataset", "Recommender",
    "RecommenderSpec", "compute_meta", "make_folds", "parse_movies",
    "parse_ratings", "rank_recommendations", "split", "train",
    "write_ratings",
]
