"""Second-level blending models over recommender predictions + meta-features."""

from __future__ import annotations

import numpy as np

from ..seeding import derive_seed
from .base import (BLENDER_FAMILIES, BlenderModel, BlenderSpec, Standardizer,
                   blender_from_json, load_blender)
from .forest import ForestBlenderModel, fit_forest_blender
from .linear import (LinearBlenderModel, assign_bins, equal_count_edges,
                     fit_binned_lr, fit_ridge)
from .mlp import MlpBlenderModel, fit_mlp_blender
from .mlp import forward as mlp_forward
from .mlp import init_params as mlp_init_params
from .mlp import loss_and_grads as mlp_loss_and_grads

__all__ = [
    "BLENDER_FAMILIES", "BlenderModel", "BlenderSpec", "ForestBlenderModel",
    "LinearBlenderModel", "MlpBlenderModel", "Standardizer", "assign_bins",
    "blender_from_json", "equal_count_edges", "fit_binned_lr", "fit_blender",
    "fit_forest_blender", "fit_mlp_blender", "fit_ridge", "load_blender",
    "mlp_forward", "mlp_init_params", "mlp_loss_and_grads", "predict_blender",
]


def fit_blender(spec: BlenderSpec, X: np.ndarray, y: np.ndarray,
                seed: int | None = None) -> BlenderModel:
    """Fit one blending candidate on feature rows X and targets y."""
    eff_seed = spec.seed if seed is None else derive_seed(seed, spec.label())
    if spec.family == "linear":
        return fit_binned_lr(X, y, criterion=spec.params.get(
            "criterion", "user_support"),
            bins=int(spec.params.get("bins", 1)),
            lam=float(spec.params.get("lam", 0.0)))
    if spec.family == "forest":
        return fit_forest_blender(X, y, trees=int(spec.params["trees"]),
                                  seed=eff_seed)
    if spec.family == "mlp":
        return fit_mlp_blender(
            X, y, layer_sizes=list(spec.params["layers"]), seed=eff_seed,
            epochs=int(spec.params.get("epochs", 200)),
            batch_size=int(spec.params.get("batch_size", 128)),
            lr=float(spec.params.get("lr", 0.01)))
    raise AssertionError(f"unhandled blender family {spec.family}")


def predict_blender(model: BlenderModel, row) -> float:
    """Clamped blender score for one feature row."""
    return model.predict_row(row)
