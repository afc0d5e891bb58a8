"""Principal component analysis on the feature covariance matrix."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np


@dataclass(frozen=True)
class PCAModel:
    """Fitted PCA basis.

    Attributes
    ----------
    mean : (p,) ndarray
    components : (k, p) ndarray
        Orthonormal rows, ordered by decreasing explained variance.
    explained_variance : (k,) ndarray
        Eigenvalues of the population covariance (denominator ``n``).
    total_variance : float
        Trace of the covariance, for explained-variance ratios.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    total_variance: float

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance == 0:
            return np.zeros_like(self.explained_variance)
        return self.explained_variance / self.total_variance

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "total_variance": self.total_variance,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PCAModel":
        return cls(
            np.array(data["mean"], dtype=float),
            np.array(data["components"], dtype=float).reshape(-1, len(data["mean"])),
            np.array(data["explained_variance"], dtype=float),
            float(data["total_variance"]),
        )


def fit_pca(x, k: int) -> PCAModel:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected an n x p matrix")
    n, p = x.shape
    if n < 2:
        raise ValueError("need at least 2 rows")
    if not 1 <= k <= min(n - 1, p):
        raise ValueError(f"k={k} outside [1, {min(n - 1, p)}]")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / n
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(-evals, kind="stable")[:k]
    evals = np.clip(evals[order], 0.0, None)
    comps = evecs[:, order].T.copy()
    # Largest-magnitude entry of each component is made positive.
    pivots = comps[np.arange(k), np.argmax(np.abs(comps), axis=1)]
    comps *= np.where(pivots < 0, -1.0, 1.0)[:, None]
    return PCAModel(mean, comps, evals, float(np.trace(cov)))


def _check(model: PCAModel, width: int, expected: int, what: str) -> None:
    if width != expected:
        raise ValueError(f"{what} has {width} columns, model expects {expected}")


def project(model: PCAModel, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    _check(model, x.shape[1], model.mean.size, "matrix")
    return (x - model.mean) @ model.components.T


def reconstruct(model: PCAModel, scores) -> np.ndarray:
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    _check(model, scores.shape[1], model.n_components, "score matrix")
    return scores @ model.components + model.mean


def normalized_distance(scores) -> np.ndarray:
    """Euclidean distance of each score row from the origin, scaled to [0, 1]."""
    d = np.linalg.norm(np.atleast_2d(scores), axis=1)
    top = d.max() if d.size else 0.0
    return d / top if top > 0 else d
