"""Tolles-Lawson aircraft-field model.

The aircraft's contribution to a scalar magnetometer is modelled as a linear
combination of 18 terms built from a vector (fluxgate) magnetometer: three
permanent terms (direction cosines), six induced terms (field magnitude times
the upper triangle of cosine products) and nine eddy-current terms (field
magnitude times cosine-by-cosine-rate products).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy import signal

from .dataset import SAMPLE_PERIOD

_AXES = "xyz"
_UPPER = [(i, j) for i in range(3) for j in range(i, 3)]
_ALL_PAIRS = [(i, j) for i in range(3) for j in range(3)]

TERM_NAMES: tuple[str, ...] = (
    tuple(f"perm_{a}" for a in _AXES)
    + tuple(f"ind_{_AXES[i]}{_AXES[j]}" for i, j in _UPPER)
    + tuple(f"eddy_{_AXES[i]}{_AXES[j]}" for i, j in _ALL_PAIRS)
)
N_TERMS = len(TERM_NAMES)


class TLError(ValueError):
    pass


class TLTerms(NamedTuple):
    cosines: np.ndarray      # (n, 3), unit rows
    rates: np.ndarray        # (n, 3), per second
    magnitude: np.ndarray    # (n,), nT


@dataclass(frozen=True)
class TLCoefficients:
    permanent: np.ndarray
    induced: np.ndarray
    eddy: np.ndarray

    def __post_init__(self):
        for name, size in (("permanent", 3), ("induced", 6), ("eddy", 9)):
            arr = np.asarray(getattr(self, name), dtype=np.float64).reshape(-1)
            if arr.size != size:
                raise TLError(f"{name} needs {size} coefficients, got {arr.size}")
            if not np.all(np.isfinite(arr)):
                raise TLError(f"{name} coefficients are not finite")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.permanent, self.induced, self.eddy])

    @classmethod
    def from_vector(cls, beta) -> "TLCoefficients":
        beta = np.asarray(beta, dtype=np.float64).reshape(-1)
        if beta.size != N_TERMS:
            raise TLError(f"expected {N_TERMS} coefficients, got {beta.size}")
        return cls(beta[:3], beta[3:9], beta[9:])

    @classmethod
    def zeros(cls) -> "TLCoefficients":
        return cls.from_vector(np.zeros(N_TERMS))

    def __add__(self, other: "TLCoefficients") -> "TLCoefficients":
        return TLCoefficients.from_vector(self.vector + other.vector)

    def to_dict(self) -> dict:
        return dict(zip(TERM_NAMES, self.vector.tolist()))

    @classmethod
    def from_dict(cls, data: Mapping[str, float]) -> "TLCoefficients":
        missing = [n for n in TERM_NAMES if n not in data]
        if missing:
            raise TLError(f"missing coefficient(s): {', '.join(missing)}")
        return cls.from_vector([float(data[n]) for n in TERM_NAMES])


def _check_fluxgate(fluxgate) -> np.ndarray:
    flux = np.asarray(fluxgate, dtype=np.float64)
    if flux.ndim != 2 or flux.shape[1] != 3:
        raise TLError("fluxgate must be an n x 3 matrix")
    return flux


def tl_terms(fluxgate, sample_period: float = SAMPLE_PERIOD) -> TLTerms:
    """Direction cosines, their time derivatives and the field magnitude.

    Derivatives are central differences, one-sided at the two ends.
    """
    flux = _check_fluxgate(fluxgate)
    if flux.shape[0] < 3:
        raise TLError("need at least 3 fluxgate samples")
    mag = np.linalg.norm(flux, axis=1)
    if np.any(mag == 0):
        raise TLError("zero-magnitude fluxgate sample; direction cosines undefined")
    cos = flux / mag[:, None]
    rates = np.gradient(cos, sample_period, axis=0)
    return TLTerms(cos, rates, mag)


def tl_design_matrix(fluxgate, sample_period: float = SAMPLE_PERIOD) -> np.ndarray:
    """The ``n x 18`` Tolles-Lawson design matrix, columns in ``TERM_NAMES`` order."""
    cos, rates, mag = tl_terms(fluxgate, sample_period)
    cols = [cos[:, i] for i in range(3)]
    cols += [mag * cos[:, i] * cos[:, j] for i, j in _UPPER]
    cols += [mag * cos[:, i] * rates[:, j] for i, j in _ALL_PAIRS]
    return np.column_stack(cols)


def bandpass(x, sample_period: float = SAMPLE_PERIOD, band=(0.1, 0.9), order: int = 4):
    """Zero-phase Butterworth band-pass along axis 0."""
    sos = signal.butter(order, band, btype="bandpass", fs=1.0 / sample_period, output="sos")
    x = np.asarray(x, dtype=np.float64)
    padlen = 3 * (2 * len(sos) + 1)
    if x.shape[0] <= padlen:
        raise TLError(f"band-pass needs more than {padlen} samples")
    return signal.sosfiltfilt(sos, x, axis=0)


# Rows of ``_TRACE_FREE`` map the 17 free parameters onto the 18 coefficients
# with ind_zz = -(ind_xx + ind_yy).
_TRACE_FREE = np.delete(np.eye(N_TERMS), 8, axis=1)
_TRACE_FREE[8, 3] = -1.0
_TRACE_FREE[8, 6] = -1.0


def fit_tl(
    scalar_total,
    fluxgate,
    sample_period: float = SAMPLE_PERIOD,
    ridge: float = 0.0,
    filter_band: Sequence[float] | None = None,
    isotropic: bool = False,
) -> TLCoefficients:
    """Least-squares Tolles-Lawson coefficients.

    Solves ``min ||A b - s||^2 + ridge * ||b||^2`` on mean-removed data, so a
    constant background (the Earth's mean field) is never attributed to the
    aircraft. The solve is an SVD-based least-squares on column-equilibrated
    data; normal equations are never formed.

    The isotropic induced combination ``ind_xx + ind_yy + ind_zz`` multiplies
    ``|B|`` itself, i.e. it rescales the Earth's field and cannot be separated
    from it. By default it is held at zero and 17 coefficients are fitted.

    Parameters
    ----------
    scalar_total : (n,) array
        Scalar magnetometer readings, nT.
    fluxgate : (n, 3) array
        Vector magnetometer readings, nT.
    ridge : float
        Tikhonov weight on the fitted coefficients; required to be positive
        when the de-meaned design matrix is rank deficient.
    filter_band : (low, high) in Hz, optional
        Band-pass the readings and every design column before fitting.
    isotropic : bool
        Fit the isotropic induced component as a free parameter too.
    """
    s = np.asarray(scalar_total, dtype=np.float64).reshape(-1)
    A = tl_design_matrix(fluxgate, sample_period)
    if s.size != A.shape[0]:
        raise TLError("scalar and fluxgate series have different lengths")
    if ridge < 0:
        raise TLError("ridge must be non-negative")
    basis = np.eye(N_TERMS) if isotropic else _TRACE_FREE
    n_free = basis.shape[1]
    if ridge == 0 and A.shape[0] < N_TERMS:
        raise TLError(f"need at least {N_TERMS} samples without ridge, got {A.shape[0]}")
    if filter_band is not None:
        A = bandpass(A, sample_period, tuple(filter_band))
        s = bandpass(s, sample_period, tuple(filter_band))

    A = A @ basis
    A = A - A.mean(axis=0)
    s = s - s.mean()
    norms = np.linalg.norm(A, axis=0)
    norms = np.where(norms > 0, norms, 1.0)
    As = A / norms
    if ridge > 0:
        As = np.vstack([As, np.diag(np.sqrt(ridge) / norms)])
        s = np.concatenate([s, np.zeros(n_free)])
    sol, _, rank, _ = np.linalg.lstsq(As, s, rcond=None)
    if ridge == 0 and rank < n_free:
        raise TLError(f"design matrix is rank deficient (rank {rank} < {n_free}); use ridge > 0")
    return TLCoefficients.from_vector(basis @ (sol / norms))


def aircraft_field(fluxgate, coeffs: TLCoefficients, sample_period: float = SAMPLE_PERIOD):
    return tl_design_matrix(fluxgate, sample_period) @ coeffs.vector


def compensate(
    scalar_total, fluxgate, coeffs: TLCoefficients, sample_period: float = SAMPLE_PERIOD
) -> np.ndarray:
    """Scalar readings minus the modelled aircraft field."""
    s = np.asarray(scalar_total, dtype=np.float64).reshape(-1)
    flux = _check_fluxgate(fluxgate)
    if s.size != flux.shape[0]:
        raise TLError("scalar and fluxgate series have different lengths")
    return s - aircraft_field(flux, coeffs, sample_period)
