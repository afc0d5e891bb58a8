"""Feature selection and importance, plus hyperparameter sweeps.

Cross-validation uses contiguous time blocks without shuffling, so no fold
trains on samples interleaved with its own test rows.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .dataset import TARGET_EQUIVALENT, FlightFrame, TargetSpec
from .metrics import score
from .models import KNNRegressor, clone, make_model
from .preprocess import apply_scaler, fit_scaler

SFS_MODEL = {"kind": "forest", "n_estimators": 25}


def blocked_folds(n: int, folds: int = 5) -> list[tuple[np.ndarray, np.ndarray]]:
    """``(train, test)`` index pairs, each test fold one contiguous block."""
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if n < folds:
        raise ValueError(f"{n} rows cannot form {folds} folds")
    rows = np.arange(n)
    blocks = np.array_split(rows, folds)
    return [(np.setdiff1d(rows, b, assume_unique=True), b) for b in blocks]


def _fit_score(config, X_tr, Y_tr, X_te, Y_te, scaler):
    if scaler:
        params = fit_scaler(X_tr, scaler)
        X_tr, X_te = apply_scaler(params, X_tr), apply_scaler(params, X_te)
    model = make_model(config).fit(X_tr, Y_tr)
    return score(model.predict(X_te), Y_te)


def cv_score(config: Mapping, X, Y, folds: int = 5, scaler: str | None = "minmax") -> float:
    """Mean held-out error (RMSE, or DRMS for 3-D targets) over blocked folds."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    scores = [
        _fit_score(config, X[tr], Y[tr], X[te], Y[te], scaler)
        for tr, te in blocked_folds(X.shape[0], folds)
    ]
    return float(np.mean(scores))


def _pmap(fn: Callable, items: Sequence, n_jobs: int) -> list:
    if n_jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class SelectionReport:
    steps: tuple[tuple[str, float], ...]
    folds: int
    scheme: str = "contiguous_blocks"
    history: tuple[dict, ...] = field(default=(), compare=False)

    @property
    def selected(self) -> list[str]:
        return [f for f, _ in self.steps]

    @property
    def scores(self) -> list[float]:
        return [s for _, s in self.steps]


def _target_matrix(frame: FlightFrame, target: TargetSpec) -> np.ndarray:
    Y = target.values(frame)
    return Y[:, 0] if target.dim == 1 else Y


def forward_sfs(
    frame: FlightFrame,
    candidates: Sequence[str],
    target: TargetSpec,
    model_config: Mapping = SFS_MODEL,
    max_features: int = 12,
    cv: int = 5,
    n_jobs: int = 1,
) -> SelectionReport:
    """Greedy forward selection on blocked cross-validation error.

    Each step adds the candidate with the lowest mean CV error; selection
    stops at ``max_features`` or as soon as no candidate strictly improves
    on the current subset. Equal scores resolve to the earlier candidate.
    """
    candidates = list(dict.fromkeys(candidates))
    if not candidates:
        raise ValueError("no candidate features")
    if max_features < 1:
        raise ValueError("max_features must be at least 1")
    if target.kind == "position_3d":
        leaked = [c for c in candidates if c in TARGET_EQUIVALENT]
        if leaked:
            raise ValueError(f"target-equivalent feature(s) among candidates: {', '.join(leaked)}")
    overlap = set(candidates) & set(target.column_names)
    if overlap:
        raise ValueError(f"target column(s) among candidates: {', '.join(sorted(overlap))}")
    frame.require(candidates)
    Y = _target_matrix(frame, target)

    selected: list[str] = []
    steps, history = [], []
    best = np.inf
    remaining = list(candidates)
    while remaining and len(selected) < max_features:
        def trial(name):
            return cv_score(model_config, frame.matrix(selected + [name]), Y, cv)

        trial_scores = _pmap(trial, remaining, n_jobs)
        history.append(dict(zip(remaining, trial_scores)))
        i = int(np.argmin(trial_scores))
        if not trial_scores[i] < best:
            break
        best = trial_scores[i]
        selected.append(remaining.pop(i))
        steps.append((selected[-1], float(best)))
    return SelectionReport(tuple(steps), cv, history=tuple(history))


@dataclass(frozen=True)
class ImportanceReport:
    """Error increase over the baseline when a feature is permuted or dropped.

    Negative deltas mean the model does better without the feature.
    """

    baseline: float
    features: tuple[str, ...]
    permutation_delta: tuple[float, ...] | None
    permutation_std: tuple[float, ...] | None
    drop_delta: tuple[float, ...] | None
    repeats: int
    seed: int

    def rows(self) -> list[dict]:
        out = []
        for i, f in enumerate(self.features):
            out.append({
                "feature": f,
                "permutation_delta": None if self.permutation_delta is None else self.permutation_delta[i],
                "permutation_std": None if self.permutation_std is None else self.permutation_std[i],
                "drop_delta": None if self.drop_delta is None else self.drop_delta[i],
            })
        return out


def feature_importance(
    model,
    X_test,
    Y_test,
    features: Sequence[str],
    mode: str = "permutation",
    repeats: int = 5,
    seed: int = 0,
    X_train=None,
    Y_train=None,
    only: Sequence[str] | None = None,
) -> ImportanceReport:
    """Permutation and/or drop-column importance on a held-out set.

    Parameters
    ----------
    model : fitted regressor
        Trained on columns named by ``features``.
    mode : {"permutation", "drop", "both"}
    repeats : int
        Independent shuffles per feature (permutation mode).
    X_train, Y_train : arrays
        Needed for drop mode, where a fresh copy of the model is refit
        without each feature.
    only : sequence of str, optional
        Restrict the analysis to these features.
    """
    if mode not in ("permutation", "drop", "both"):
        raise ValueError(f"unknown importance mode {mode!r}")
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    features = list(features)
    X_test = np.asarray(X_test, dtype=np.float64)
    if X_test.shape[1] != len(features):
        raise ValueError("feature names do not match X_test columns")
    names = features if only is None else list(only)
    unknown = [f for f in names if f not in features]
    if unknown:
        raise ValueError(f"unknown feature(s): {', '.join(unknown)}")
    cols = [features.index(f) for f in names]
    baseline = score(model.predict(X_test), Y_test)

    perm_mean = perm_std = drop = None
    if mode in ("permutation", "both"):
        means, stds = [], []
        for j in cols:
            deltas = []
            for r in range(repeats):
                gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(j, r))))
                shuffled = X_test.copy()
                shuffled[:, j] = shuffled[gen.permutation(X_test.shape[0]), j]
                deltas.append(score(model.predict(shuffled), Y_test) - baseline)
            means.append(float(np.mean(deltas)))
            stds.append(float(np.std(deltas)))
        perm_mean, perm_std = tuple(means), tuple(stds)
    if mode in ("drop", "both"):
        if len(features) < 2:
            raise ValueError("cannot drop the only feature; the remaining set would be empty")
        if X_train is None or Y_train is None:
            raise ValueError("drop mode needs training data to refit")
        X_train = np.asarray(X_train, dtype=np.float64)
        deltas = []
        for j in cols:
            keep = [k for k in range(len(features)) if k != j]
            refit = clone(model).fit(X_train[:, keep], Y_train)
            deltas.append(score(refit.predict(X_test[:, keep]), Y_test) - baseline)
        drop = tuple(float(d) for d in deltas)
    return ImportanceReport(baseline, tuple(names), perm_mean, perm_std, drop, repeats, seed)


def grid_search(
    X, Y, model_config: Mapping, grid: Mapping[str, Sequence], cv: int = 5,
    n_jobs: int = 1, scaler: str | None = "minmax",
) -> tuple[dict, list[tuple[dict, float]]]:
    """Exhaustive search over ``grid``; the first best point in grid order wins ties."""
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("empty parameter grid")
    keys = list(grid)
    points = [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]
    scores = _pmap(lambda pt: cv_score({**model_config, **pt}, X, Y, cv, scaler), points, n_jobs)
    best = int(np.argmin(scores))
    return points[best], list(zip(points, scores))


def tune_max_depth(
    X, Y, depths: Sequence[int], model_config: Mapping = {"kind": "forest"},
    cv: int = 5, n_jobs: int = 1,
) -> tuple[int, list[tuple[int, float]]]:
    """Max-depth sweep; returns the depth with the lowest CV error (smallest on ties)."""
    depths = sorted(set(int(d) for d in depths))
    if not depths:
        raise ValueError("empty depth list")
    if depths[0] < 1:
        raise ValueError("depths must be at least 1")
    best, curve = grid_search(X, Y, model_config, {"max_depth": depths}, cv, n_jobs)
    return best["max_depth"], [(p["max_depth"], s) for p, s in curve]


def tune_knn(
    X, Y, ks: Sequence[int] = range(1, 51), cv: int = 5, aggregation: str = "mean",
    scaler: str | None = "minmax",
) -> tuple[int, list[tuple[int, float]]]:
    """Grid search over the neighbour count, sharing one neighbour query per fold."""
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise ValueError("ks must be non-empty and positive")
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    totals = np.zeros(len(ks))
    folds = blocked_folds(X.shape[0], cv)
    for tr, te in folds:
        X_tr, X_te = X[tr], X[te]
        if scaler:
            params = fit_scaler(X_tr, scaler)
            X_tr, X_te = apply_scaler(params, X_tr), apply_scaler(params, X_te)
        kmax = min(ks[-1], tr.size)
        knn = KNNRegressor(kmax, aggregation).fit(X_tr, Y[tr])
        nbrs = knn.kneighbors(X_te, kmax)
        for i, k in enumerate(ks):
            pred = knn.aggregate(nbrs[:, :min(k, kmax)])
            if Y.ndim == 1:
                pred = pred[:, 0]
            totals[i] += score(pred, Y[te])
    curve = [(k, float(t / len(folds))) for k, t in zip(ks, totals)]
    best = min(curve, key=lambda c: (c[1], c[0]))
    return best[0], curve
