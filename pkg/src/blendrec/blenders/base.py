"""Shared blender machinery: spec type, standardization, JSON round-trip."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgumentError

BLENDER_FAMILIES = ("linear", "forest", "mlp")

# meta columns occupy the last four feature positions, in this order
META_OFFSETS = {"user_support": -4, "movie_support": -3,
                "user_average": -2, "movie_average": -1}

FORMAT_VERSION = 1


@dataclass(frozen=True)
class BlenderSpec:
    """One blending candidate: family, hyper-parameters, seed."""

    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in BLENDER_FAMILIES:
            raise InvalidArgumentError(
                f"unknown blender family {self.family!r}; "
                f"valid: {', '.join(BLENDER_FAMILIES)}")

    def label(self) -> str:
        def fmt(v):
            return "x".join(str(s) for s in v) if isinstance(v, (list, tuple)) else v
        inner = ",".join(f"{k}={fmt(v)}" for k, v in sorted(self.params.items()))
        return f"{self.family}({inner})"

    def to_json_dict(self) -> dict:
        return {"family": self.family, "params": self.params, "seed": self.seed}

    @staticmethod
    def from_json_dict(d: dict) -> "BlenderSpec":
        return BlenderSpec(d["family"], dict(d.get("params", {})),
                           int(d.get("seed", 0)))


class Standardizer:
    """Column-wise zero-mean/unit-variance transform fit on training rows."""

    def __init__(self, mean: np.ndarray, std: np.ndarray):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)

    @staticmethod
    def fit(X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return Standardizer(mean, std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std


class BlenderModel:
    """Base interface: clamped row/batch prediction plus JSON state."""

    family: str = "?"

    def __init__(self, n_features: int, warnings=None):
        self.n_features = int(n_features)
        self.warnings = list(warnings or [])

    def _check_features(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise InvalidArgumentError(
                f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_row(self, x) -> float:
        return float(self.predict_many(np.asarray(x, dtype=np.float64)[None, :])[0])

    def _state(self) -> dict:
        raise NotImplementedError

    @classmethod
    def _from_state(cls, state: dict) -> "BlenderModel":
        raise NotImplementedError

    def to_json(self) -> str:
        doc = {"format_version": FORMAT_VERSION, "family": self.family,
               "n_features": self.n_features, "warnings": self.warnings,
               "state": self._state()}
        return json.dumps(doc, sort_keys=True)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")


_BLENDER_REGISTRY: dict[str, type] = {}


def register_blender(cls):
    _BLENDER_REGISTRY[cls.family] = cls
    return cls


def blender_from_json(text: str) -> BlenderModel:
    doc = json.loads(text)
    if doc.get("format_version") != FORMAT_VERSION:
        raise InvalidArgumentError(
            f"unsupported blender format version {doc.get('format_version')}")
    cls = _BLENDER_REGISTRY.get(doc["family"])
    if cls is None:
        raise InvalidArgumentError(f"unknown blender family {doc['family']!r}")
    model = cls._from_state(doc["state"])
    model.warnings = list(doc.get("warnings", []))
    return model


def load_blender(path) -> BlenderModel:
    with open(path, "r", encoding="utf-8") as fh:
        return blender_from_json(fh.read())
