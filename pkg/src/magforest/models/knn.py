"""Brute-force k-nearest-neighbour regression with a Euclidean metric."""

from __future__ import annotations

import numpy as np

from .tree import check_features, check_targets

# Bound on the temporary (rows x train x features) difference block.
_BLOCK_ELEMENTS = 4_000_000


class KNNRegressor:
    """Average (or median) of the targets of the ``n_neighbors`` closest rows.

    Distances are exact squared Euclidean sums, and equal distances are
    ordered by training-row index, so results do not depend on how the query
    is chunked.
    """

    def __init__(self, n_neighbors=5, aggregation="mean"):
        self.n_neighbors = n_neighbors
        self.aggregation = aggregation

    def get_params(self) -> dict:
        return {"n_neighbors": self.n_neighbors, "aggregation": self.aggregation}

    def fit(self, X, y):
        if self.aggregation not in ("mean", "median"):
            raise ValueError("aggregation must be 'mean' or 'median'")
        X = check_features(X)
        Y, self.squeeze_ = check_targets(y, X.shape[0])
        if not 1 <= self.n_neighbors <= X.shape[0]:
            raise ValueError(f"n_neighbors={self.n_neighbors} outside [1, {X.shape[0]}]")
        self.X_ = X
        self.Y_ = Y
        self.n_features_ = X.shape[1]
        self.target_dim_ = Y.shape[1]
        return self

    def kneighbors(self, X, k: int | None = None) -> np.ndarray:
        """Indices of the ``k`` nearest training rows, closest first."""
        if not hasattr(self, "X_"):
            raise RuntimeError("model needs to be fitted first")
        k = self.n_neighbors if k is None else k
        n_train = self.X_.shape[0]
        if not 1 <= k <= n_train:
            raise ValueError(f"k={k} outside [1, {n_train}]")
        X = check_features(X, self.n_features_)
        out = np.empty((X.shape[0], k), dtype=np.int64)
        block = max(1, _BLOCK_ELEMENTS // max(1, n_train * self.n_features_))
        for lo in range(0, X.shape[0], block):
            diff = X[lo:lo + block, None, :] - self.X_[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
            for r in range(d2.shape[0]):
                cand = np.flatnonzero(d2[r] <= kth[r])
                order = np.argsort(d2[r, cand], kind="stable")[:k]
                out[lo + r] = cand[order]
        return out

    def aggregate(self, neighbors: np.ndarray) -> np.ndarray:
        vals = self.Y_[neighbors]
        if self.aggregation == "median":
            return np.median(vals, axis=1)
        return vals.mean(axis=1)

    def predict(self, X) -> np.ndarray:
        out = self.aggregate(self.kneighbors(X))
        return out[:, 0] if self.squeeze_ else out


def fit_knn(X, y, **config) -> KNNRegressor:
    return KNNRegressor(**config).fit(X, y)
