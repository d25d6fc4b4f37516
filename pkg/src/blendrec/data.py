"""Rating-file parsing, indexed datasets, and cross-validation fold plans.

File formats follow the classic double-colon layout:

* ratings: ``UserID::MovieID::Rating::Timestamp`` per line
* movies:  ``MovieID::Title::Genre1|Genre2|...`` per line

External ids are re-indexed to dense ``[0, M)`` / ``[0, N)`` ranges in
first-appearance order so models can address similarity matrices and
factor tables directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DuplicateRatingError, InvalidArgumentError, ParseError

RATING_MIN = 1.0
RATING_MAX = 5.0


@dataclass(frozen=True)
class Rating:
    """One user-item-rating triplet carrying its (unused) timestamp."""

    user_id: int
    item_id: int
    value: float
    timestamp: int


class RatingsDataset:
    """An ordered collection of ratings with dense index maps.

    ``users``/``items`` hold dense indices into ``[0, M)`` / ``[0, N)``;
    ``user_index``/``item_index`` map external ids to those indices and
    ``user_ids``/``item_ids`` invert them.  Subsets built by :meth:`subset`
    share the parent's index maps, so a fold view of a dataset addresses
    the same dense id space as the full dataset.

    Instances are immutable after construction and safe to share across
    threads.
    """

    def __init__(self, users, items, values, timestamps,
                 user_index, item_index, user_ids, item_ids):
        self.users = np.asarray(users, dtype=np.int64)
        self.items = np.asarray(items, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        self.timestamps = np.asarray(timestamps, dtype=np.int64)
        self.user_index = user_index
        self.item_index = item_index
        self.user_ids = user_ids
        self.item_ids = item_ids
        for arr in (self.users, self.items, self.values, self.timestamps):
            arr.setflags(write=False)

    @property
    def M(self) -> int:
        return len(self.user_ids)

    @property
    def N(self) -> int:
        return len(self.item_ids)

    def __len__(self) -> int:
        return len(self.values)

    def rating(self, k: int) -> Rating:
        """The k-th rating as a :class:`Rating` with external ids."""
        return Rating(
            user_id=self.user_ids[self.users[k]],
            item_id=self.item_ids[self.items[k]],
            value=float(self.values[k]),
            timestamp=int(self.timestamps[k]),
        )

    @property
    def ratings(self) -> list[Rating]:
        """All ratings as :class:`Rating` objects (meant for small data)."""
        return [self.rating(k) for k in range(len(self))]

    def subset(self, indices) -> "RatingsDataset":
        """A view over the given rating positions, sharing index maps."""
        idx = np.asarray(indices, dtype=np.int64)
        return RatingsDataset(
            self.users[idx], self.items[idx], self.values[idx],
            self.timestamps[idx],
            self.user_index, self.item_index, self.user_ids, self.item_ids,
        )

    def global_mean(self) -> float:
        return float(np.sum(self.values) / len(self)) if len(self) else 0.0

    def __eq__(self, other):
        if not isinstance(other, RatingsDataset):
            return NotImplemented
        return (
            self.user_ids == other.user_ids
            and self.item_ids == other.item_ids
            and np.array_equal(self.users, other.users)
            and np.array_equal(self.items, other.items)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.timestamps, other.timestamps)
        )

    @staticmethod
    def from_triplets(triplets) -> "RatingsDataset":
        """Build a dataset from (user_id, item_id, value[, timestamp]) rows."""
        users, items, values, stamps = [], [], [], []
        user_index, item_index = {}, {}
        user_ids, item_ids = [], []
        seen = set()
        for row in triplets:
            uid, iid, val = row[0], row[1], row[2]
            ts = row[3] if len(row) > 3 else 0
            if (uid, iid) in seen:
                raise InvalidArgumentError(f"duplicate rating ({uid}, {iid})")
            seen.add((uid, iid))
            if uid not in user_index:
                user_index[uid] = len(user_ids)
                user_ids.append(uid)
            if iid not in item_index:
                item_index[iid] = len(item_ids)
                item_ids.append(iid)
            users.append(user_index[uid])
            items.append(item_index[iid])
            values.append(float(val))
            stamps.append(int(ts))
        return RatingsDataset(users, items, values, stamps,
                              user_index, item_index, user_ids, item_ids)


@dataclass
class GenreCatalog:
    """Binary genre descriptions keyed by external movie id.

    ``genres`` is the sorted union of all genre tokens seen in the file;
    each catalog entry is a 0/1 vector over that list.  Items that appear
    in a ratings dataset but not in the catalog are represented by an
    all-zero vector (see :meth:`aligned_matrix`).
    """

    genres: list[str]
    item_genres: dict[int, np.ndarray] = field(repr=False)

    def vector(self, item_id: int) -> np.ndarray:
        """Genre vector for an external movie id (zeros if unknown)."""
        vec = self.item_genres.get(item_id)
        if vec is None:
            return np.zeros(len(self.genres), dtype=np.float64)
        return vec

    def aligned_matrix(self, dataset: RatingsDataset) -> np.ndarray:
        """(N, G) genre matrix aligned to the dataset's dense item indices."""
        mat = np.zeros((dataset.N, len(self.genres)), dtype=np.float64)
        for ext_id, dense in dataset.item_index.items():
            vec = self.item_genres.get(ext_id)
            if vec is not None:
                mat[dense] = vec
        return mat


@dataclass(frozen=True)
class FoldPlan:
    """Disjoint assignment of rating positions to ``k`` folds."""

    k: int
    assignment: np.ndarray
    seed: int

    def fold_indices(self, j: int) -> np.ndarray:
        """Rating positions assigned to fold ``j``."""
        if not 0 <= j < self.k:
            raise InvalidArgumentError(f"fold label {j} outside [0, {self.k})")
        return np.flatnonzero(self.assignment == j)

    def to_csv(self) -> str:
        lines = ["rating_index,fold"]
        lines += [f"{i},{f}" for i, f in enumerate(self.assignment)]
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_csv(text: str, seed: int = 0) -> "FoldPlan":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != "rating_index,fold":
            raise InvalidArgumentError("bad fold-plan CSV header")
        assignment = np.empty(len(lines) - 1, dtype=np.int64)
        for ln in lines[1:]:
            idx_s, fold_s = ln.split(",")
            assignment[int(idx_s)] = int(fold_s)
        return FoldPlan(k=int(assignment.max()) + 1, assignment=assignment,
                        seed=seed)


def _parse_int(token: str, path, line_no: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(path, line_no, f"non-integer {what}: {token!r}") from None


def parse_ratings(path) -> RatingsDataset:
    """Parse a ``UserID::MovieID::Rating::Timestamp`` file.

    Dense index maps are built in first-appearance order and line order is
    preserved.  Malformed lines and duplicate (user, item) pairs raise.
    """
    users, items, values, stamps = [], [], [], []
    user_index, item_index = {}, {}
    user_ids, item_ids = [], []
    seen: set[tuple[int, int]] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            parts = line.split("::")
            if len(parts) != 4:
                raise ParseError(path, line_no,
                                 f"expected 4 '::'-separated fields, got {len(parts)}")
            uid = _parse_int(parts[0], path, line_no, "user id")
            iid = _parse_int(parts[1], path, line_no, "item id")
            if uid <= 0 or iid <= 0:
                raise ParseError(path, line_no, "ids must be positive integers")
            try:
                val = float(parts[2])
            except ValueError:
                raise ParseError(path, line_no,
                                 f"non-numeric rating: {parts[2]!r}") from None
            if not RATING_MIN <= val <= RATING_MAX:
                raise ParseError(path, line_no, f"rating {val} outside [1, 5]")
            ts = _parse_int(parts[3], path, line_no, "timestamp")
            if (uid, iid) in seen:
                raise DuplicateRatingError(path, line_no,
                                           f"duplicate rating ({uid}, {iid})")
            seen.add((uid, iid))
            if uid not in user_index:
                user_index[uid] = len(user_ids)
                user_ids.append(uid)
            if iid not in item_index:
                item_index[iid] = len(item_ids)
                item_ids.append(iid)
            users.append(user_index[uid])
            items.append(item_index[iid])
            values.append(val)
            stamps.append(ts)
    return RatingsDataset(users, items, values, stamps,
                          user_index, item_index, user_ids, item_ids)


def write_ratings(dataset: RatingsDataset, path) -> None:
    """Serialize a dataset back to the double-colon ratings format."""
    with open(path, "w", encoding="utf-8") as fh:
        for k in range(len(dataset)):
            r = dataset.rating(k)
            fh.write(f"{r.user_id}::{r.item_id}::{r.value:g}::{r.timestamp}\n")


def parse_movies(path) -> GenreCatalog:
    """Parse a ``MovieID::Title::Genre1|Genre2`` file into a genre catalog."""
    raw: dict[int, list[str]] = {}
    tokens: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            parts = line.split("::")
            if len(parts) != 3:
                raise ParseError(path, line_no,
                                 f"expected 3 '::'-separated fields, got {len(parts)}")
            iid = _parse_int(parts[0], path, line_no, "movie id")
            if iid <= 0:
                raise ParseError(path, line_no, "movie id must be positive")
            if iid in raw:
                raise ParseError(path, line_no, f"duplicate movie id {iid}")
            genres = [g for g in parts[2].split("|") if g]
            if not genres:
                raise ParseError(path, line_no, "empty genre list")
            raw[iid] = genres
            tokens.update(genres)
    genre_list = sorted(tokens)
    pos = {g: i for i, g in enumerate(genre_list)}
    item_genres = {}
    for iid, genres in raw.items():
        vec = np.zeros(len(genre_list), dtype=np.float64)
        for g in genres:
            vec[pos[g]] = 1.0
        vec.setflags(write=False)
        item_genres[iid] = vec
    return GenreCatalog(genres=genre_list, item_genres=item_genres)


def fold_assignment(n: int, k: int, seed: int) -> np.ndarray:
    """Fold label per position for ``n`` items by uniform shuffle."""
    if n == 0:
        raise InvalidArgumentError("cannot plan folds for an empty collection")
    if k < 2 or k > n:
        raise InvalidArgumentError(f"fold count {k} outside [2, {n}]")
    perm = np.random.default_rng(seed).permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    base, rem = divmod(n, k)
    start = 0
    for j in range(k):
        size = base + (1 if j < rem else 0)
        assignment[perm[start:start + size]] = j
        start += size
    assignment.setflags(write=False)
    return assignment


def make_folds(dataset: RatingsDataset, k: int, seed: int) -> FoldPlan:
    """Assign rating positions to ``k`` folds by uniform shuffle.

    Deterministic for a fixed (dataset order, k, seed); fold sizes differ
    by at most one.
    """
    return FoldPlan(k=k, assignment=fold_assignment(len(dataset), k, seed),
                    seed=seed)


def split(dataset: RatingsDataset, plan: FoldPlan, j: int):
    """(train, test) views for fold ``j``: test = fold j, train = the rest."""
    if not 0 <= j < plan.k:
        raise InvalidArgumentError(f"fold label {j} outside [0, {plan.k})")
    test_idx = np.flatnonzero(plan.assignment == j)
    train_idx = np.flatnonzero(plan.assignment != j)
    return dataset.subset(train_idx), dataset.subset(test_idx)
