"""Three-layer orchestration: blendset construction, nested CV, metrics.

The trainer layer runs a k-fold pass over the ratings: in each fold
iteration every roster recommender is trained on the held-in folds and
scored on the held-out pairs, producing one out-of-fold prediction row
per rating (plus the pair's train-fold meta-features).  The tester layer
then partitions those rows again and, per outer fold, selects the best
blending candidate by an inner cross-validation before scoring it on the
outer hold-out.

All fold plans and training seeds derive from one master seed (see
``seeding``), so both layers are bit-reproducible, including when
per-fold training runs on a thread pool.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .blenders import BlenderModel, BlenderSpec, fit_blender
from .data import (FoldPlan, GenreCatalog, RatingsDataset, fold_assignment,
                   make_folds, split)
from .errors import InvalidArgumentError, PipelineError, TrainingError
from .metafeatures import META_COLUMNS, MetaTable, MetaVector
from .recommenders import RecommenderSpec, train
from .seeding import derive_seed


def rmse(predicted, actual) -> float:
    """Root of the mean squared difference between two equal-length vectors."""
    predicted = np.asarray(predicted, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if predicted.shape != actual.shape or predicted.ndim != 1:
        raise InvalidArgumentError("prediction/actual vectors must match")
    if len(predicted) == 0:
        raise InvalidArgumentError("cannot compute RMSE of empty vectors")
    diff = predicted - actual
    return float(np.sqrt(diff @ diff / len(diff)))


@dataclass(frozen=True)
class BlendRow:
    """One blendset row: m out-of-fold predictions, meta-features, truth."""

    user: int
    item: int
    actual: float
    predictions: np.ndarray
    meta: MetaVector

    def features(self) -> np.ndarray:
        return np.concatenate([self.predictions, self.meta.as_array()])


class Blendset:
    """Out-of-fold predictions and meta-features, one row per rating."""

    def __init__(self, users, items, actual, predictions, meta,
                 specs, fold_plan: FoldPlan | None):
        self.users = np.asarray(users, dtype=np.int64)
        self.items = np.asarray(items, dtype=np.int64)
        self.actual = np.asarray(actual, dtype=np.float64)
        self.predictions = np.asarray(predictions, dtype=np.float64)
        self.meta = np.asarray(meta, dtype=np.float64)
        self.specs = list(specs)
        self.fold_plan = fold_plan

    @property
    def m(self) -> int:
        return self.predictions.shape[1]

    def __len__(self) -> int:
        return len(self.actual)

    @property
    def X(self) -> np.ndarray:
        """(n, m+4) feature matrix: prediction columns then meta columns."""
        return np.hstack([self.predictions, self.meta])

    def row(self, k: int) -> BlendRow:
        mv = MetaVector(int(self.meta[k, 0]), int(self.meta[k, 1]),
                        float(self.meta[k, 2]), float(self.meta[k, 3]))
        return BlendRow(int(self.users[k]), int(self.items[k]),
                        float(self.actual[k]), self.predictions[k].copy(), mv)

    def to_csv(self) -> str:
        cols = (["user", "item", "actual"]
                + [f"p_{j + 1}" for j in range(self.m)] + list(META_COLUMNS))
        lines = [",".join(cols)]
        for k in range(len(self)):
            vals = [str(int(self.users[k])), str(int(self.items[k])),
                    _f17(self.actual[k])]
            vals += [_f17(v) for v in self.predictions[k]]
            vals += [_f17(v) for v in self.meta[k]]
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())

    @staticmethod
    def from_csv(text: str) -> "Blendset":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise InvalidArgumentError("empty blendset CSV")
        header = lines[0].split(",")
        if header[:3] != ["user", "item", "actual"] \
                or header[-4:] != list(META_COLUMNS):
            raise InvalidArgumentError("bad blendset CSV header")
        m = len(header) - 7
        if m < 1:
            raise InvalidArgumentError("blendset CSV has no prediction columns")
        n = len(lines) - 1
        users = np.empty(n, dtype=np.int64)
        items = np.empty(n, dtype=np.int64)
        actual = np.empty(n)
        preds = np.empty((n, m))
        meta = np.empty((n, 4))
        for r, ln in enumerate(lines[1:]):
            parts = ln.split(",")
            if len(parts) != len(header):
                raise InvalidArgumentError(f"blendset CSV row {r + 2} malformed")
            users[r] = int(parts[0])
            items[r] = int(parts[1])
            actual[r] = float(parts[2])
            preds[r] = [float(v) for v in parts[3:3 + m]]
            meta[r] = [float(v) for v in parts[3 + m:]]
        return Blendset(users, items, actual, preds, meta, [], None)

    @staticmethod
    def load_csv(path) -> "Blendset":
        with open(path, "r", encoding="utf-8") as fh:
            return Blendset.from_csv(fh.read())


def _f17(x: float) -> str:
    return "%.17g" % x


def _train_and_score(spec, spec_key, train_view, test_view, genres,
                     master_seed, fold_j):
    eff_seed = derive_seed(master_seed, "trainer", fold_j, spec_key, spec.seed)
    seeded = RecommenderSpec(spec.family, dict(spec.params), seed=eff_seed)
    try:
        model = train(seeded, train_view, genres)
    except TrainingError as exc:
        raise TrainingError(f"{spec.label()} failed on trainer fold {fold_j}: "
                            f"{exc}") from exc
    return model.predict_many(test_view.users, test_view.items)


def build_blendset(dataset: RatingsDataset, specs, genres: GenreCatalog | None,
                   k: int, seed: int, threads: int = 1) -> Blendset:
    """Out-of-fold predictions for every rating under a k-fold trainer pass."""
    if not specs:
        raise InvalidArgumentError("need at least one recommender spec")
    if k < 2:
        raise InvalidArgumentError("trainer fold count must be >= 2")
    plan = make_folds(dataset, k, derive_seed(seed, "trainer-folds"))
    n, m = len(dataset), len(specs)
    preds = np.empty((n, m), dtype=np.float64)
    meta = np.empty((n, 4), dtype=np.float64)
    for j in range(plan.k):
        train_view, test_view = split(dataset, plan, j)
        test_idx = plan.fold_indices(j)
        meta[test_idx] = MetaTable(train_view).rows(test_view.users,
                                                    test_view.items)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = [
                    pool.submit(_train_and_score, spec, spec.label(),
                                train_view, test_view, genres, seed, j)
                    for spec in specs]
                for s, fut in enumerate(futures):
                    preds[test_idx, s] = fut.result()
        else:
            for s, spec in enumerate(specs):
                preds[test_idx, s] = _train_and_score(
                    spec, spec.label(), train_view, test_view, genres, seed, j)
    return Blendset(dataset.users, dataset.items, dataset.values,
                    preds, meta, specs, plan)


def evaluate_recommender(dataset: RatingsDataset, spec: RecommenderSpec,
                         genres: GenreCatalog | None, k: int,
                         seed: int) -> float:
    """Plain k-fold CV RMSE (mean of per-fold RMSEs) of one recommender.

    Shares the trainer layer's fold-plan and seed derivations, so the
    result matches the RMSE of that spec's blendset column.
    """
    if k < 2:
        raise InvalidArgumentError("fold count must be >= 2")
    plan = make_folds(dataset, k, derive_seed(seed, "trainer-folds"))
    fold_scores = []
    for j in range(plan.k):
        train_view, test_view = split(dataset, plan, j)
        preds = _train_and_score(spec, spec.label(), train_view, test_view,
                                 genres, seed, j)
        fold_scores.append(rmse(preds, test_view.values))
    return float(np.mean(fold_scores))


def individual_cv_rmses(blendset: Blendset) -> list[float]:
    """Mean-over-folds RMSE of each prediction column of a blendset."""
    if blendset.fold_plan is None:
        raise InvalidArgumentError("blendset carries no fold plan")
    plan = blendset.fold_plan
    out = []
    for s in range(blendset.m):
        scores = [rmse(blendset.predictions[plan.fold_indices(j), s],
                       blendset.actual[plan.fold_indices(j)])
                  for j in range(plan.k)]
        out.append(float(np.mean(scores)))
    return out


@dataclass(frozen=True)
class FoldOutcome:
    fold: int
    selected: BlenderSpec
    rmse: float


@dataclass
class NestedCvReport:
    """Per-outer-fold blender selections and hold-out RMSEs."""

    k: int
    grid: list[BlenderSpec]
    per_fold: list[FoldOutcome]
    mean_rmse: float
    warnings: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "grid": [s.to_json_dict() for s in self.grid],
            "per_fold": [{"fold": o.fold,
                          "selected": o.selected.to_json_dict(),
                          "rmse": o.rmse} for o in self.per_fold],
            "mean_rmse": self.mean_rmse,
            "warnings": self.warnings,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "NestedCvReport":
        return NestedCvReport(
            k=int(d["k"]),
            grid=[BlenderSpec.from_json_dict(s) for s in d["grid"]],
            per_fold=[FoldOutcome(int(o["fold"]),
                                  BlenderSpec.from_json_dict(o["selected"]),
                                  float(o["rmse"])) for o in d["per_fold"]],
            mean_rmse=float(d["mean_rmse"]),
            warnings=list(d.get("warnings", [])),
        )


def _fit_eval(spec, X_train, y_train, X_test, y_test, seed):
    model = fit_blender(spec, X_train, y_train, seed=seed)
    return rmse(model.predict_many(X_test), y_test)


def nested_cv(blendset: Blendset, grid, k: int, seed: int,
              inner_k: int | None = None, threads: int = 1) -> NestedCvReport:
    """Select-and-evaluate blenders per the nested cross-validation scheme.

    For each outer fold, every candidate is scored by a fresh inner CV
    over the outer-training rows; the candidate with the lowest mean
    inner RMSE (ties: first in grid order) is refitted on all
    outer-training rows and scored on the held-out fold.  Returns the
    mean of the per-fold hold-out RMSEs.
    """
    grid = list(grid)
    if not grid:
        raise InvalidArgumentError("empty blender grid")
    if k < 2:
        raise InvalidArgumentError("outer fold count must be >= 2")
    n = len(blendset)
    inner_k = (k - 1) if inner_k is None else inner_k
    if inner_k < 2:
        raise InvalidArgumentError("inner fold count must be >= 2")
    X, y = blendset.X, blendset.actual
    outer = fold_assignment(n, k, derive_seed(seed, "tester-folds"))

    warnings: list[str] = []
    per_fold: list[FoldOutcome] = []
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for j in range(k):
            train_rows = np.flatnonzero(outer != j)
            test_rows = np.flatnonzero(outer == j)
            inner = fold_assignment(len(train_rows), inner_k,
                                    derive_seed(seed, "inner", j))
            jobs = {}
            for ca, spec in enumerate(grid):
                for i in range(inner_k):
                    fit_rows = train_rows[inner != i]
                    val_rows = train_rows[inner == i]
                    args = (spec, X[fit_rows], y[fit_rows], X[val_rows],
                            y[val_rows], derive_seed(seed, "blend", j, i, ca))
                    jobs[(ca, i)] = (pool.submit(_fit_eval, *args) if pool
                                     else args)

            mean_inner = np.full(len(grid), np.inf)
            for ca, spec in enumerate(grid):
                scores = []
                failed = False
                for i in range(inner_k):
                    job = jobs[(ca, i)]
                    try:
                        score = job.result() if pool else _fit_eval(*job)
                    except TrainingError as exc:
                        warnings.append(
                            f"outer fold {j}: candidate {spec.label()} "
                            f"failed inner fold {i}: {exc}")
                        failed = True
                        break
                    scores.append(score)
                if not failed:
                    mean_inner[ca] = float(np.mean(scores))

            if not np.any(np.isfinite(mean_inner)):
                raise PipelineError(
                    f"outer fold {j}: every grid candidate failed to train")
            best = int(np.argmin(mean_inner))
            selected = grid[best]
            final = fit_blender(selected, X[train_rows], y[train_rows],
                                seed=derive_seed(seed, "tester", j, "refit",
                                                 best))
            fold_rmse = rmse(final.predict_many(X[test_rows]), y[test_rows])
            per_fold.append(FoldOutcome(j, selected, fold_rmse))
    finally:
        if pool:
            pool.shutdown()
    mean = float(np.mean([o.rmse for o in per_fold]))
    return NestedCvReport(k=k, grid=grid, per_fold=per_fold, mean_rmse=mean,
                          warnings=warnings)


def plain_cv_blender(blendset: Blendset, spec: BlenderSpec, k: int,
                     seed: int) -> float:
    """k-fold CV RMSE of a single blender, matching nested_cv's refit path."""
    n = len(blendset)
    X, y = blendset.X, blendset.actual
    outer = fold_assignment(n, k, derive_seed(seed, "tester-folds"))
    scores = []
    for j in range(k):
        train_rows = np.flatnonzero(outer != j)
        test_rows = np.flatnonzero(outer == j)
        model = fit_blender(spec, X[train_rows], y[train_rows],
                            seed=derive_seed(seed, "tester", j, "refit", 0))
        scores.append(rmse(model.predict_many(X[test_rows]), y[test_rows]))
    return float(np.mean(scores))


def finalize_blender(blendset: Blendset, grid, folds: int = 4,
                     seed: int = 0) -> tuple[BlenderSpec, BlenderModel]:
    """Model-selection CV over the whole blendset, then a full refit.

    Produces the deployable blender after evaluation: the grid winner by
    mean CV RMSE, refitted on every blendset row.
    """
    grid = list(grid)
    if not grid:
        raise InvalidArgumentError("empty blender grid")
    n = len(blendset)
    X, y = blendset.X, blendset.actual
    assignment = fold_assignment(n, folds, derive_seed(seed, "finalize-folds"))
    mean_scores = np.full(len(grid), np.inf)
    for ca, spec in enumerate(grid):
        try:
            scores = []
            for i in range(folds):
                fit_rows = np.flatnonzero(assignment != i)
                val_rows = np.flatnonzero(assignment == i)
                scores.append(_fit_eval(spec, X[fit_rows], y[fit_rows],
                                        X[val_rows], y[val_rows],
                                        derive_seed(seed, "finalize", i, ca)))
            mean_scores[ca] = float(np.mean(scores))
        except TrainingError:
            continue
    if not np.any(np.isfinite(mean_scores)):
        raise PipelineError("every grid candidate failed to train")
    best = int(np.argmin(mean_scores))
    model = fit_blender(grid[best], X, y,
                        seed=derive_seed(seed, "finalize", "refit", best))
    return grid[best], model
