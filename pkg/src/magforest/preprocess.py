"""Feature scaling and low-variance screening."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

DEFAULT_VARIANCE_THRESHOLD = 0.0025


@dataclass(frozen=True)
class ScalerParams:
    """Per-feature affine scaling ``(x - offset) / scale``.

    For ``minmax`` the offset is the training minimum and the scale the
    training range; for ``standard`` they are the mean and the population
    standard deviation. A zero range or zero deviation is stored as scale 1,
    so a constant training feature maps to 0.
    """

    kind: str
    offset: np.ndarray
    scale: np.ndarray
    features: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("minmax", "standard"):
            raise ValueError(f"unknown scaler kind {self.kind!r}")
        offset = np.asarray(self.offset, dtype=np.float64).reshape(-1)
        scale = np.asarray(self.scale, dtype=np.float64).reshape(-1)
        if offset.shape != scale.shape:
            raise ValueError("offset and scale have different lengths")
        if np.any(scale <= 0):
            raise ValueError("scale must be positive")
        if self.features and len(self.features) != offset.size:
            raise ValueError("feature names do not match parameter count")
        offset.setflags(write=False)
        scale.setflags(write=False)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "features", tuple(self.features))

    @property
    def n_features(self) -> int:
        return self.offset.size

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "features": list(self.features),
            "offset": self.offset.tolist(),
            "scale": self.scale.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ScalerParams":
        return cls(data["kind"], np.array(data["offset"], dtype=float),
                   np.array(data["scale"], dtype=float), tuple(data["features"]))


def _as_matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    return x


def fit_scaler(x, kind: str = "minmax", features: Sequence[str] = ()) -> ScalerParams:
    """Fit scaling statistics on training rows."""
    x = _as_matrix(x)
    if x.shape[0] < 1:
        raise ValueError("need at least one row")
    if kind == "minmax":
        offset = x.min(axis=0)
        scale = x.max(axis=0) - offset
    elif kind == "standard":
        offset = x.mean(axis=0)
        scale = x.std(axis=0)
    else:
        raise ValueError(f"unknown scaler kind {kind!r}")
    # Exactly constant columns get offset = the value itself; rounding in the
    # mean could otherwise leave a tiny spurious deviation.
    constant = x.max(axis=0) == x.min(axis=0)
    offset = np.where(constant, x[0], offset)
    scale = np.where((scale > 0) & ~constant, scale, 1.0)
    return ScalerParams(kind, offset, scale, tuple(features))


def _check_width(params: ScalerParams, x: np.ndarray) -> None:
    if x.shape[1] != params.n_features:
        raise ValueError(
            f"matrix has {x.shape[1]} columns, scaler was fit on {params.n_features}"
        )


def apply_scaler(params: ScalerParams, x) -> np.ndarray:
    x = _as_matrix(x)
    _check_width(params, x)
    return (x - params.offset) / params.scale


def invert_scaler(params: ScalerParams, x) -> np.ndarray:
    x = _as_matrix(x)
    _check_width(params, x)
    return x * params.scale + params.offset


@dataclass(frozen=True)
class VarianceReport:
    """Feature standard deviations sorted high to low, plus the exclusion list."""

    features: tuple[str, ...]
    stds: tuple[float, ...]
    threshold: float
    excluded: tuple[str, ...]
    retained: tuple[str, ...]

    def rows(self) -> list[tuple[str, float, bool]]:
        excluded = set(self.excluded)
        return [(f, s, f in excluded) for f, s in zip(self.features, self.stds)]


def variance_report(
    stds: Mapping[str, float], threshold: float = DEFAULT_VARIANCE_THRESHOLD
) -> VarianceReport:
    """Build a report from precomputed per-feature standard deviations.

    A feature is excluded when its variance (std squared) is strictly below
    ``threshold``; retained features keep their input order.
    """
    if threshold < 0:
        raise ValueError("variance threshold must be non-negative")
    names = list(stds)
    values = np.array([float(stds[n]) for n in names])
    order = np.argsort(-values, kind="stable")
    excluded = [n for n, s in zip(names, values) if s * s < threshold]
    retained = [n for n, s in zip(names, values) if not s * s < threshold]
    return VarianceReport(
        tuple(names[i] for i in order),
        tuple(float(values[i]) for i in order),
        float(threshold),
        tuple(excluded),
        tuple(retained),
    )


def variance_filter(
    x, threshold: float = DEFAULT_VARIANCE_THRESHOLD, features: Sequence[str] | None = None
) -> VarianceReport:
    """Flag low-variance columns of an already min-max normalised matrix.

    Standard deviations use the population denominator.
    """
    x = _as_matrix(x)
    if features is None:
        features = [f"f{j}" for j in range(x.shape[1])]
    if len(features) != x.shape[1]:
        raise ValueError("feature names do not match column count")
    return variance_report(dict(zip(features, x.std(axis=0))), threshold)


def correlation_matrix(x) -> tuple[np.ndarray, np.ndarray]:
    """Pearson correlation matrix and a per-column constant flag.

    Constant columns have undefined correlation; their off-diagonal entries
    are reported as 0 and the flag is set.
    """
    x = _as_matrix(x)
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least 2 rows for a correlation")
    centered = x - x.mean(axis=0)
    std = np.sqrt((centered * centered).mean(axis=0))
    constant = (std == 0) | (x.max(axis=0) == x.min(axis=0))
    safe = np.where(constant, 1.0, std)
    z = centered / safe
    corr = (z.T @ z) / n
    corr[constant, :] = 0.0
    corr[:, constant] = 0.0
    corr = np.clip(0.5 * (corr + corr.T), -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr, constant
