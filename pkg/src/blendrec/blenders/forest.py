"""Random-forest blender.

Training delegates to scikit-learn's regression forest (bootstrap samples
of the full training size, variance-reduction splits, floor-sqrt feature
subsampling, minimum leaf of five rows, seeded); the fitted trees are
then extracted into flat arrays so prediction and serialization are
self-contained.  The forest score is the exact arithmetic mean of the
individual tree outputs.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from sklearn.ensemble import RandomForestRegressor

from ..errors import InvalidArgumentError
from .base import BlenderModel, register_blender

MIN_LEAF = 5


@njit(cache=True)
def _tree_outputs(children_left, children_right, feature, threshold, value,
                  tree_ptr, X, out):
    n_trees = len(tree_ptr) - 1
    for r in range(X.shape[0]):
        for t in range(n_trees):
            base = tree_ptr[t]
            node = base
            while children_left[node] >= 0:
                if X[r, feature[node]] <= threshold[node]:
                    node = base + children_left[node]
                else:
                    node = base + children_right[node]
            out[r, t] = value[node]


@register_blender
class ForestBlenderModel(BlenderModel):
    family = "forest"

    def __init__(self, n_trees, max_features, children_left, children_right,
                 feature, threshold, value, tree_ptr, n_features,
                 warnings=None):
        super().__init__(n_features=n_features, warnings=warnings)
        self.n_trees = int(n_trees)
        self.max_features = int(max_features)
        self._children_left = np.asarray(children_left, dtype=np.int64)
        self._children_right = np.asarray(children_right, dtype=np.int64)
        self._feature = np.asarray(feature, dtype=np.int64)
        self._threshold = np.asarray(threshold, dtype=np.float64)
        self._value = np.asarray(value, dtype=np.float64)
        self._tree_ptr = np.asarray(tree_ptr, dtype=np.int64)

    def tree_outputs(self, X: np.ndarray) -> np.ndarray:
        """(n_rows, n_trees) matrix of individual tree outputs."""
        X = self._check_features(X)
        out = np.empty((X.shape[0], self.n_trees), dtype=np.float64)
        _tree_outputs(self._children_left, self._children_right,
                      self._feature, self._threshold, self._value,
                      self._tree_ptr, np.ascontiguousarray(X), out)
        return out

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        outputs = self.tree_outputs(X)
        return np.clip(outputs.sum(axis=1) / self.n_trees, 1.0, 5.0)

    def _state(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "n_features": self.n_features,
            "max_features": self.max_features,
            "children_left": self._children_left.tolist(),
            "children_right": self._children_right.tolist(),
            "feature": self._feature.tolist(),
            "threshold": self._threshold.tolist(),
            "value": self._value.tolist(),
            "tree_ptr": self._tree_ptr.tolist(),
        }

    @classmethod
    def _from_state(cls, state: dict) -> "ForestBlenderModel":
        return cls(state["n_trees"], state["max_features"],
                   np.array(state["children_left"]),
                   np.array(state["children_right"]),
                   np.array(state["feature"]),
                   np.array(state["threshold"]),
                   np.array(state["value"]),
                   np.array(state["tree_ptr"], dtype=np.int64),
                   n_features=state["n_features"])


def fit_forest_blender(X: np.ndarray, y: np.ndarray, trees: int,
                       seed: int = 0) -> ForestBlenderModel:
    """Fit a seeded regression forest and extract its trees."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if trees < 1:
        raise InvalidArgumentError("tree count must be >= 1")
    max_features = max(int(np.sqrt(X.shape[1])), 1)
    rf = RandomForestRegressor(
        n_estimators=trees, criterion="squared_error",
        max_features=max_features, min_samples_leaf=MIN_LEAF,
        bootstrap=True, random_state=int(seed) % (2 ** 32), n_jobs=1)
    rf.fit(X, y)

    lefts, rights, feats, thresholds, values = [], [], [], [], []
    tree_ptr = [0]
    total = 0
    for est in rf.estimators_:
        t = est.tree_
        lefts.append(t.children_left.astype(np.int64))
        rights.append(t.children_right.astype(np.int64))
        feats.append(t.feature.astype(np.int64))
        thresholds.append(t.threshold.astype(np.float64))
        values.append(t.value.reshape(-1).astype(np.float64))
        total += t.node_count
        tree_ptr.append(total)
    return ForestBlenderModel(
        trees, max_features,
        np.concatenate(lefts), np.concatenate(rights), np.concatenate(feats),
        np.concatenate(thresholds), np.concatenate(values),
        np.array(tree_ptr, dtype=np.int64), n_features=X.shape[1])
