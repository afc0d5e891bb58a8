"""Bootstrap-aggregated forest of CART regressors."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .tree import DecisionTreeRegressor, check_features, check_targets

# Purpose tags for the per-tree random streams.
BOOTSTRAP_STREAM = 0
FEATURE_STREAM = 1


def tree_seed(master_seed: int, tree_index: int, purpose: int) -> np.random.SeedSequence:
    """Random stream keyed by (master seed, tree index, purpose)."""
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(tree_index), int(purpose)))


def bootstrap_indices(n: int, seed) -> np.ndarray:
    """Draw ``n`` row indices uniformly with replacement from ``range(n)``.

    ``seed`` is an int or a SeedSequence; the draw uses the counter-based
    Philox generator so it does not depend on any shared state.
    """
    if n < 1:
        raise ValueError("bootstrap needs at least one row")
    gen = np.random.Generator(np.random.Philox(seed))
    return gen.integers(0, n, size=n, dtype=np.int64)


def out_of_bag(indices: np.ndarray, n: int) -> np.ndarray:
    """Rows never drawn by a bootstrap sample."""
    mask = np.ones(n, dtype=bool)
    mask[indices] = False
    return np.flatnonzero(mask)


class RandomForestRegressor:
    """Random forest regressor.

    Tree ``i`` is grown on a bootstrap draw seeded from
    ``(random_state, i, BOOTSTRAP_STREAM)`` and uses per-node feature subsets
    seeded from ``(random_state, i, FEATURE_STREAM)``. Trees never share
    random state, so the fitted forest is the same for any ``n_jobs``.
    """

    def __init__(self, n_estimators=100, max_depth=None, min_samples_split=2,
                 min_samples_leaf=1, max_features=None, bootstrap=True,
                 aggregation="mean", random_state=0, n_jobs=1):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.aggregation = aggregation
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.trees_: list[DecisionTreeRegressor] = []

    def get_params(self) -> dict:
        return {
            "n_estimators": self.n_estimators,
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "min_samples_leaf": self.min_samples_leaf,
            "max_features": self.max_features,
            "bootstrap": self.bootstrap,
            "aggregation": self.aggregation,
            "random_state": self.random_state,
            "n_jobs": self.n_jobs,
        }

    def _new_tree(self) -> DecisionTreeRegressor:
        return DecisionTreeRegressor(
            max_depth=self.max_depth,
            min_samples_split=self.min_samples_split,
            min_samples_leaf=self.min_samples_leaf,
            max_features=self.max_features,
        )

    def bootstrap_sample(self, tree_index: int, n: int) -> np.ndarray:
        if not self.bootstrap:
            return np.arange(n, dtype=np.int64)
        return bootstrap_indices(n, tree_seed(self.random_state, tree_index, BOOTSTRAP_STREAM))

    def fit(self, X, y):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be at least 1")
        if self.aggregation not in ("mean", "median"):
            raise ValueError("aggregation must be 'mean' or 'median'")
        X = check_features(X)
        if X.shape[0] == 0:
            raise ValueError("cannot fit a forest on empty data")
        Y, self.squeeze_ = check_targets(y, X.shape[0])
        n = X.shape[0]

        def grow(i):
            tree = self._new_tree()
            tree.fit(X, Y, samples=self.bootstrap_sample(i, n),
                     seed=tree_seed(self.random_state, i, FEATURE_STREAM))
            return tree

        workers = max(1, int(self.n_jobs or 1))
        if workers == 1:
            trees = [grow(i) for i in range(self.n_estimators)]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                trees = list(pool.map(grow, range(self.n_estimators)))
        for t in trees:
            t.squeeze_ = False
        self.trees_ = trees
        self.n_features_ = X.shape[1]
        self.target_dim_ = Y.shape[1]
        return self

    def tree_predictions(self, X) -> np.ndarray:
        """Per-tree predictions, shape ``(n_trees, n_rows, target_dim)``."""
        if not self.trees_:
            raise RuntimeError("forest needs to be fitted first")
        X = check_features(X, self.n_features_)
        return np.stack([t.predict_2d(X) for t in self.trees_])

    def predict(self, X) -> np.ndarray:
        per_tree = self.tree_predictions(X)
        if self.aggregation == "median":
            out = np.median(per_tree, axis=0)
        else:
            out = per_tree.mean(axis=0)
        return out[:, 0] if self.squeeze_ else out


def fit_forest(X, y, **config) -> RandomForestRegressor:
    return RandomForestRegressor(**config).fit(X, y)
