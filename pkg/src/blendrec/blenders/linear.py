"""Ridge regression and its binned variant.

``fit_ridge`` solves ``min |y - Xw - c|^2 + lam*|w|^2`` in closed form
via the centered normal equations, leaving the intercept unpenalized.
The binned model cuts the training rows into (near) equal-count bins by
quantiles of one raw meta-feature column and fits an independent ridge
model per bin; features are standardized once on the full training set.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError
from .base import (META_OFFSETS, BlenderModel, Standardizer, register_blender)


def fit_ridge(X: np.ndarray, y: np.ndarray, lam: float):
    """Closed-form ridge fit; returns (weights, intercept).

    With ``lam == 0`` and a singular system, falls back to the
    minimum-norm least-squares solution.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0 or len(X) != len(y):
        raise InvalidArgumentError("need a non-empty X with matching y")
    if lam < 0:
        raise InvalidArgumentError("regularization must be >= 0")
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    yc = y - y_mean
    A = Xc.T @ Xc + lam * np.eye(X.shape[1])
    rhs = Xc.T @ yc
    if lam > 0:
        w = np.linalg.solve(A, rhs)
    else:
        try:
            w = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            w = np.linalg.lstsq(Xc, yc, rcond=None)[0]
        else:
            # a solvable-but-singular system still deserves the stable path
            if not np.all(np.isfinite(w)):
                w = np.linalg.lstsq(Xc, yc, rcond=None)[0]
    intercept = float(y_mean - x_mean @ w)
    return w, intercept


def equal_count_edges(values: np.ndarray, bins: int) -> np.ndarray:
    """Interior thresholds putting ~n/bins rows in each ``value <= edge`` bin."""
    n = len(values)
    sorted_vals = np.sort(values)
    edges = []
    for t in range(1, bins):
        pos = int(np.ceil(t * n / bins)) - 1
        edges.append(sorted_vals[min(max(pos, 0), n - 1)])
    return np.array(edges, dtype=np.float64)


def assign_bins(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Bin index per value: count of interior edges strictly below it."""
    return np.searchsorted(edges, values, side="left")


@register_blender
class LinearBlenderModel(BlenderModel):
    family = "linear"

    def __init__(self, criterion, edges, weights, intercepts, lam,
                 standardizer: Standardizer, warnings=None):
        super().__init__(n_features=weights.shape[1], warnings=warnings)
        self.criterion = criterion
        self.edges = np.asarray(edges, dtype=np.float64)
        self.weights = np.asarray(weights, dtype=np.float64)   # (bins, p)
        self.intercepts = np.asarray(intercepts, dtype=np.float64)
        self.lam = float(lam)
        self.standardizer = standardizer

    @property
    def n_bins(self) -> int:
        return len(self.intercepts)

    def _criterion_column(self, X: np.ndarray) -> np.ndarray:
        return X[:, META_OFFSETS[self.criterion] + self.n_features]

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        X = self._check_features(X)
        crit = self._criterion_column(X)
        Xs = self.standardizer.transform(X)
        bins = assign_bins(crit, self.edges)
        preds = np.einsum("ij,ij->i", Xs, self.weights[bins]) \
            + self.intercepts[bins]
        return np.clip(preds, 1.0, 5.0)

    def _state(self) -> dict:
        return {
            "criterion": self.criterion,
            "edges": self.edges.tolist(),
            "weights": self.weights.tolist(),
            "intercepts": self.intercepts.tolist(),
            "lam": self.lam,
            "standardizer": {"mean": self.standardizer.mean.tolist(),
                             "std": self.standardizer.std.tolist()},
        }

    @classmethod
    def _from_state(cls, state: dict) -> "LinearBlenderModel":
        return cls(state["criterion"], np.array(state["edges"]),
                   np.array(state["weights"]), np.array(state["intercepts"]),
                   state["lam"],
                   Standardizer(np.array(state["standardizer"]["mean"]),
                                np.array(state["standardizer"]["std"])))


def fit_binned_lr(X: np.ndarray, y: np.ndarray, criterion: str, bins: int,
                  lam: float) -> LinearBlenderModel:
    """Fit one ridge model per equal-count bin of a raw meta-feature.

    Bins with fewer than p+1 rows are merged into a neighbor (removing
    the shared edge) and a warning is recorded on the model.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if criterion not in ("user_support", "movie_support"):
        raise InvalidArgumentError(f"bad binning criterion {criterion!r}")
    if bins < 1:
        raise InvalidArgumentError("bin count must be >= 1")
    n, p = X.shape
    crit = X[:, META_OFFSETS[criterion] + p]
    edges = equal_count_edges(crit, bins)
    # collapse duplicate thresholds produced by heavy ties
    edges = np.unique(edges)

    warnings = []
    min_rows = p + 1
    while True:
        assignment = assign_bins(crit, edges)
        counts = np.bincount(assignment, minlength=len(edges) + 1)
        small = np.flatnonzero(counts < min_rows)
        if len(small) == 0 or len(edges) == 0:
            break
        b = int(small[0])
        # drop the edge between bin b and its right neighbor (left for last)
        drop = b if b < len(edges) else len(edges) - 1
        warnings.append(
            f"merged underfull bin {b} ({counts[b]} rows < {min_rows})")
        edges = np.delete(edges, drop)

    standardizer = Standardizer.fit(X)
    Xs = standardizer.transform(X)
    n_bins = len(edges) + 1
    weights = np.zeros((n_bins, p))
    intercepts = np.zeros(n_bins)
    assignment = assign_bins(crit, edges)
    for b in range(n_bins):
        rows = assignment == b
        w, c = fit_ridge(Xs[rows], y[rows], lam)
        weights[b] = w
        intercepts[b] = c
    return LinearBlenderModel(criterion, edges, weights, intercepts, lam,
                              standardizer, warnings)
