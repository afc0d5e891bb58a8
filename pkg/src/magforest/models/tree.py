"""CART regression tree for scalar and 3-vector targets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels

NO_LIMIT = np.iinfo(np.int64).max


class TreeArrays(NamedTuple):
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray


@dataclass
class TreeNode:
    """Nested view of one node; leaves have ``feature is None``."""

    value: np.ndarray
    n_samples: int
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


def check_features(X, n_features: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("X must be a 2-D matrix")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"X has {X.shape[1]} features, model was fit on {n_features}")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains NaN or infinite values")
    return np.ascontiguousarray(X)


def check_targets(y, n_rows: int) -> tuple[np.ndarray, bool]:
    """Return targets as ``(n, d)`` and whether the caller passed a 1-D vector."""
    Y = np.asarray(y, dtype=np.float64)
    squeeze = Y.ndim == 1
    if squeeze:
        Y = Y[:, None]
    if Y.ndim != 2 or Y.shape[0] != n_rows:
        raise ValueError("y must have one row per sample")
    if Y.shape[1] not in (1, 3):
        raise ValueError(f"target dimension must be 1 or 3, got {Y.shape[1]}")
    if not np.all(np.isfinite(Y)):
        raise ValueError("y contains NaN or infinite values")
    return np.ascontiguousarray(Y), squeeze


def resolve_max_features(max_features, n_features: int) -> int:
    if max_features is None:
        return n_features
    if isinstance(max_features, float):
        if not 0 < max_features <= 1:
            raise ValueError("fractional max_features must be in (0, 1]")
        return max(1, int(max_features * n_features))
    if not 1 <= int(max_features):
        raise ValueError("max_features must be at least 1")
    return min(int(max_features), n_features)


def seed_to_u64(seed) -> np.uint64:
    """Collapse an int or SeedSequence into one 64-bit key."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.uint64(seed.generate_state(1, np.uint64)[0])


class DecisionTreeRegressor:
    """Exhaustive-search CART regressor.

    Every node scans all candidate features and, for each, every midpoint
    between consecutive distinct values among the node's samples, keeping the
    split with the largest reduction in sum-of-squared error (summed over
    target dimensions). Ties go to the lowest feature index, then the lowest
    threshold. A node stays a leaf when it is pure, at ``max_depth``, smaller
    than ``min_samples_split``, or when no split leaves ``min_samples_leaf``
    samples on both sides.

    Parameters
    ----------
    max_depth : int or None
    min_samples_split : int
    min_samples_leaf : int
    max_features : int, float or None
        Per-node random feature subset size; None considers every feature.
    random_state : int
        Seed for the feature subsets; unused when ``max_features`` is None.
    """

    def __init__(self, max_depth=None, min_samples_split=2, min_samples_leaf=1,
                 max_features=None, random_state=0):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.random_state = random_state
        self.tree_: TreeArrays | None = None

    def get_params(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "min_samples_leaf": self.min_samples_leaf,
            "max_features": self.max_features,
            "random_state": self.random_state,
        }

    def _validate(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be at least 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be at least 1")

    def fit(self, X, y, samples=None, seed=None):
        """Fit on all rows, or on the row multiset ``samples`` (e.g. a bootstrap draw)."""
        self._validate()
        X = check_features(X)
        if X.shape[0] == 0:
            raise ValueError("cannot fit a tree on empty data")
        Y, self.squeeze_ = check_targets(y, X.shape[0])
        if samples is None:
            samples = np.arange(X.shape[0], dtype=np.int64)
        else:
            samples = np.asarray(samples, dtype=np.int64)
            if samples.size == 0:
                raise ValueError("empty sample set")
        self.n_features_ = X.shape[1]
        self.target_dim_ = Y.shape[1]
        n_sub = resolve_max_features(self.max_features, self.n_features_)
        key = seed_to_u64(self.random_state if seed is None else seed)
        depth = NO_LIMIT if self.max_depth is None else int(self.max_depth)
        self.tree_ = TreeArrays(*_kernels.build_tree(
            X, Y, samples, depth, int(self.min_samples_split),
            int(self.min_samples_leaf), n_sub, key))
        return self

    def _require_fit(self):
        if self.tree_ is None:
            raise RuntimeError("tree needs to be fitted first")

    def apply(self, X) -> np.ndarray:
        """Leaf node index for each row."""
        self._require_fit()
        X = check_features(X, self.n_features_)
        t = self.tree_
        return _kernels.apply_tree(t.feature, t.threshold, t.left, t.right, X)

    def predict_2d(self, X) -> np.ndarray:
        return self.tree_.value[self.apply(X)]

    def predict(self, X) -> np.ndarray:
        out = self.predict_2d(X)
        return out[:, 0] if self.squeeze_ else out

    @property
    def n_nodes(self) -> int:
        self._require_fit()
        return self.tree_.feature.size

    @property
    def n_leaves(self) -> int:
        self._require_fit()
        return int(np.count_nonzero(self.tree_.feature < 0))

    def get_depth(self) -> int:
        self._require_fit()
        t = self.tree_
        depth = np.zeros(t.feature.size, dtype=np.int64)
        for i in range(t.feature.size):
            if t.feature[i] >= 0:
                depth[t.left[i]] = depth[t.right[i]] = depth[i] + 1
        return int(depth.max())

    @property
    def root(self) -> TreeNode:
        self._require_fit()
        t = self.tree_

        def build(i):
            node = TreeNode(t.value[i].copy(), int(t.n_samples[i]))
            if t.feature[i] >= 0:
                node.feature = int(t.feature[i])
                node.threshold = float(t.threshold[i])
                node.left = build(int(t.left[i]))
                node.right = build(int(t.right[i]))
            return node

        return build(0)


def fit_tree(X, y, **config) -> DecisionTreeRegressor:
    return DecisionTreeRegressor(**config).fit(X, y)
