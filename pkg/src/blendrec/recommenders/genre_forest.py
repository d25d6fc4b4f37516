"""Per-user random forests over item genre bits.

Each user with at least one training rating gets a forest of regression
trees fitted to (genre vector, rating) pairs from their own history.
Trees are grown on bootstrap samples with variance-reduction splits over
a random subset of sqrt(G) genre bits per node; features are binary, so
every split tests ``bit <= 0.5``.  The user's score for an item is the
exact arithmetic mean of the tree outputs.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..data import GenreCatalog, RatingsDataset
from ..errors import ColdStartError
from .base import FallbackStats, Recommender, register

_U64_MUL = np.uint64(6364136223846793005)
_U64_INC = np.uint64(1442695040888963407)
_SHIFT = np.uint64(33)


@njit(cache=True, inline="always")
def _lcg_next(state):
    return state * _U64_MUL + _U64_INC


@njit(cache=True, inline="always")
def _lcg_below(state, n):
    state = _lcg_next(state)
    return state, np.int64((state >> _SHIFT) % np.uint64(n))


@njit(cache=True)
def _build_tree(X, y, seed, mtry, max_depth,
                feature, left, right, value):
    """Grow one tree on a bootstrap sample; returns (node_count, state).

    ``X`` is the user's (n, G) binary genre matrix, ``y`` the ratings.
    Output arrays must hold at least 2n+1 nodes.  ``max_depth`` <= 0
    means unlimited.
    """
    n, G = X.shape
    state = np.uint64(seed)
    idx = np.empty(n, dtype=np.int64)
    for t in range(n):
        state, r = _lcg_below(state, n)
        idx[t] = r
    feat_buf = np.empty(G, dtype=np.int64)
    tmp = np.empty(n, dtype=np.int64)

    stack_node = np.empty(2 * n + 1, dtype=np.int64)
    stack_lo = np.empty(2 * n + 1, dtype=np.int64)
    stack_hi = np.empty(2 * n + 1, dtype=np.int64)
    stack_depth = np.empty(2 * n + 1, dtype=np.int64)
    top = 0
    stack_node[0], stack_lo[0], stack_hi[0], stack_depth[0] = 0, 0, n, 0
    n_nodes = 1

    while top >= 0:
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        depth = stack_depth[top]
        top -= 1

        m = hi - lo
        s = 0.0
        ss = 0.0
        for t in range(lo, hi):
            v = y[idx[t]]
            s += v
            ss += v * v
        value[node] = s / m
        feature[node] = -1
        left[node] = -1
        right[node] = -1

        if m < 2 or (max_depth > 0 and depth >= max_depth):
            continue
        if ss - s * s / m <= 1e-12:
            continue

        for g in range(G):
            feat_buf[g] = g
        k = mtry if mtry < G else G
        for t in range(k):
            state, r = _lcg_below(state, G - t)
            j = t + r
            feat_buf[t], feat_buf[j] = feat_buf[j], feat_buf[t]

        best_gain = 1e-12
        best_f = -1
        parent = s * s / m
        for t in range(k):
            f = feat_buf[t]
            nl = 0
            sl = 0.0
            for q in range(lo, hi):
                if X[idx[q], f] <= 0.5:
                    nl += 1
                    sl += y[idx[q]]
            nr = m - nl
            if nl == 0 or nr == 0:
                continue
            sr = s - sl
            gain = sl * sl / nl + sr * sr / nr - parent
            if gain > best_gain:
                best_gain = gain
                best_f = f

        if best_f < 0:
            continue

        nl = 0
        for q in range(lo, hi):
            if X[idx[q], best_f] <= 0.5:
                tmp[nl] = idx[q]
                nl += 1
        nr = 0
        for q in range(lo, hi):
            if X[idx[q], best_f] > 0.5:
                tmp[nl + nr] = idx[q]
                nr += 1
        for q in range(m):
            idx[lo + q] = tmp[q]

        feature[node] = best_f
        left[node] = n_nodes
        right[node] = n_nodes + 1
        lchild, rchild = n_nodes, n_nodes + 1
        n_nodes += 2
        top += 1
        stack_node[top], stack_lo[top], stack_hi[top], stack_depth[top] = \
            lchild, lo, lo + nl, depth + 1
        top += 1
        stack_node[top], stack_lo[top], stack_hi[top], stack_depth[top] = \
            rchild, lo + nl, hi, depth + 1

    return n_nodes


@njit(cache=True)
def _forest_mean(feature, left, right, value, tree_ptr, t_lo, t_hi, x):
    total = 0.0
    for t in range(t_lo, t_hi):
        node = tree_ptr[t]
        while feature[node] >= 0:
            if x[feature[node]] <= 0.5:
                node = tree_ptr[t] + left[node]
            else:
                node = tree_ptr[t] + right[node]
        total += value[node]
    return total / (t_hi - t_lo)


@register
class UserForestModel(Recommender):
    family = "rfcb"

    def __init__(self, n_trees, mtry, max_depth, genre_matrix,
                 user_ptr, tree_ptr, feature, left, right, value,
                 user_means, fallback: FallbackStats):
        super().__init__(fallback)
        self.n_trees = int(n_trees)
        self.mtry = int(mtry)
        self.max_depth = int(max_depth)
        self.genre_matrix = genre_matrix
        self._user_ptr = user_ptr      # user -> [tree range)
        self._tree_ptr = tree_ptr      # tree -> node base offset
        self._feature = feature
        self._left = left
        self._right = right
        self._value = value
        self.user_means = user_means   # per-user fallback means

    @staticmethod
    def train(train_data: RatingsDataset, genres: GenreCatalog, trees: int,
              max_depth: int = 0, seed: int = 0) -> "UserForestModel":
        rng = np.random.default_rng(seed)
        genre_matrix = genres.aligned_matrix(train_data)
        G = genre_matrix.shape[1]
        mtry = max(int(np.sqrt(G)), 1)
        M = train_data.M

        by_user = np.argsort(train_data.users, kind="stable")
        u_counts = np.bincount(train_data.users, minlength=M)
        u_ptr = np.zeros(M + 1, dtype=np.int64)
        np.cumsum(u_counts, out=u_ptr[1:])
        items_sorted = train_data.items[by_user]
        values_sorted = train_data.values[by_user]

        user_ptr = np.zeros(M + 1, dtype=np.int64)
        tree_ptr_list = [0]
        feats, lefts, rights, vals = [], [], [], []
        n_tree_total = 0
        node_base = 0
        for u in range(M):
            lo, hi = u_ptr[u], u_ptr[u + 1]
            if lo == hi:
                user_ptr[u + 1] = n_tree_total
                continue
            Xu = np.ascontiguousarray(genre_matrix[items_sorted[lo:hi]])
            yu = np.ascontiguousarray(values_sorted[lo:hi])
            n = hi - lo
            for _ in range(trees):
                tseed = int(rng.integers(0, 2 ** 63))
                feature = np.empty(2 * n + 1, dtype=np.int32)
                left = np.empty(2 * n + 1, dtype=np.int32)
                right = np.empty(2 * n + 1, dtype=np.int32)
                value = np.empty(2 * n + 1, dtype=np.float64)
                n_nodes = _build_tree(Xu, yu, tseed, mtry, max_depth,
                                      feature, left, right, value)
                feats.append(feature[:n_nodes].copy())
                lefts.append(left[:n_nodes].copy())
                rights.append(right[:n_nodes].copy())
                vals.append(value[:n_nodes].copy())
                node_base += n_nodes
                tree_ptr_list.append(node_base)
                n_tree_total += 1
            user_ptr[u + 1] = n_tree_total

        fallback = FallbackStats.from_dataset(train_data)
        return UserForestModel(
            trees, mtry, max_depth, genre_matrix,
            user_ptr, np.array(tree_ptr_list, dtype=np.int64),
            np.concatenate(feats) if feats else np.empty(0, dtype=np.int32),
            np.concatenate(lefts) if lefts else np.empty(0, dtype=np.int32),
            np.concatenate(rights) if rights else np.empty(0, dtype=np.int32),
            np.concatenate(vals) if vals else np.empty(0, dtype=np.float64),
            fallback.user_means, fallback)

    def tree_outputs(self, u: int, x: np.ndarray) -> np.ndarray:
        """Individual tree outputs for user u on genre vector x."""
        t_lo, t_hi = self._user_ptr[u], self._user_ptr[u + 1]
        out = np.empty(t_hi - t_lo, dtype=np.float64)
        for t in range(t_lo, t_hi):
            node = self._tree_ptr[t]
            base = self._tree_ptr[t]
            while self._feature[node] >= 0:
                if x[self._feature[node]] <= 0.5:
                    node = base + self._left[node]
                else:
                    node = base + self._right[node]
            out[t - t_lo] = self._value[node]
        return out

    def raw_score(self, u: int, i: int) -> float:
        M = len(self._user_ptr) - 1
        if not (0 <= u < M) or not (0 <= i < self.genre_matrix.shape[0]):
            raise ColdStartError(u, i, "index outside training space")
        t_lo, t_hi = self._user_ptr[u], self._user_ptr[u + 1]
        if t_lo == t_hi:
            raise ColdStartError(u, i, "user has no training ratings")
        return float(_forest_mean(self._feature, self._left, self._right,
                                  self._value, self._tree_ptr, t_lo, t_hi,
                                  self.genre_matrix[i]))

    def _state(self):
        meta = {"n_trees": self.n_trees, "mtry": self.mtry,
                "max_depth": self.max_depth}
        arrays = {
            "genre_matrix": self.genre_matrix,
            "user_ptr": self._user_ptr, "tree_ptr": self._tree_ptr,
            "feature": self._feature, "left": self._left,
            "right": self._right, "value": self._value,
            "user_means": self.user_means,
        }
        return meta, arrays

    @classmethod
    def _from_state(cls, meta, arrays):
        M = len(arrays["user_ptr"]) - 1
        placeholder = FallbackStats(arrays["user_means"],
                                    np.full(arrays["genre_matrix"].shape[0],
                                            np.nan), 0.0)
        return cls(meta["n_trees"], meta["mtry"], meta["max_depth"],
                   arrays["genre_matrix"], arrays["user_ptr"],
                   arrays["tree_ptr"], arrays["feature"], arrays["left"],
                   arrays["right"], arrays["value"], arrays["user_means"],
                   placeholder)
