"""Flight tables and the named feature presets."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

SAMPLE_PERIOD = 0.1

TL_INS_FREE = (
    "mag_3_uc", "mag_4_uc", "mag_5_uc", "diurnal", "flux_b_x", "flux_b_y",
    "flux_c_y", "static_p", "total_p",
)
INS_AIDED = TL_INS_FREE + ("ins_vw", "ins_wander", "vol_srvo")
TL_INS_AIDED = tuple(
    name.replace("_uc", "_c") if name.startswith("mag_") else name
    for name in INS_AIDED
)

PRESETS: dict[str, tuple[str, ...]] = {
    "tl_ins_free": TL_INS_FREE,
    "ins_aided": INS_AIDED,
    "tl_ins_aided": TL_INS_AIDED,
}

# INS outputs that are the position target under another name.
TARGET_EQUIVALENT = ("ins_lon", "ins_lat", "ins_alt")

DEFAULT_ANOMALY_COLUMN = "anomaly_nt"
DEFAULT_POSITION_COLUMNS = ("utm_x", "utm_y", "utm_z")


class DataError(ValueError):
    """Raised for malformed flight files or invalid frame operations."""


def preset(name: str, exclude_diurnal: bool = False) -> list[str]:
    """Return the feature list of a named preset."""
    try:
        features = list(PRESETS[name])
    except KeyError:
        raise DataError(
            f"unknown preset {name!r}; expected one of {sorted(PRESETS)}"
        ) from None
    if exclude_diurnal:
        features.remove("diurnal")
    return features


@dataclass(frozen=True)
class FlightFrame:
    """Immutable, time-ordered table of named numeric columns.

    Missing cells are NaN. Column arrays are stored read-only so a frame can
    be shared between threads.
    """

    columns: Mapping[str, np.ndarray]
    sample_period: float = SAMPLE_PERIOD
    flight_id: str | None = None
    n_rows: int = field(init=False)

    def __post_init__(self):
        if not self.columns:
            raise DataError("a flight frame needs at least one column")
        if not self.sample_period > 0:
            raise DataError("sample_period must be positive")
        frozen = {}
        lengths = set()
        for name, values in self.columns.items():
            arr = np.array(values, dtype=np.float64)
            if arr.ndim != 1:
                raise DataError(f"column {name!r} is not one-dimensional")
            arr.setflags(write=False)
            frozen[str(name)] = arr
            lengths.add(arr.shape[0])
        if len(frozen) != len(self.columns):
            raise DataError("duplicate column names")
        if len(lengths) != 1:
            raise DataError("columns have different lengths")
        n = lengths.pop()
        if n < 1:
            raise DataError("a flight frame needs at least one row")
        object.__setattr__(self, "columns", frozen)
        object.__setattr__(self, "n_rows", n)

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise DataError(f"missing column {name!r}") from None

    def require(self, names: Iterable[str]) -> None:
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise DataError(f"missing column(s): {', '.join(missing)}")

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        """Stack the named columns into an ``(n_rows, len(names))`` array."""
        self.require(names)
        return np.column_stack([self.columns[n] for n in names])

    def missing_mask(self) -> dict[str, np.ndarray]:
        return {n: np.isnan(v) for n, v in self.columns.items()}

    def take(self, rows) -> "FlightFrame":
        """Row subset (slice, index array or boolean mask), order preserved."""
        return FlightFrame(
            {n: v[rows] for n, v in self.columns.items()},
            self.sample_period, self.flight_id,
        )

    def with_columns(self, updates: Mapping[str, np.ndarray]) -> "FlightFrame":
        cols = dict(self.columns)
        cols.update(updates)
        return FlightFrame(cols, self.sample_period, self.flight_id)

    def select(self, names: Sequence[str]) -> "FlightFrame":
        self.require(names)
        return FlightFrame(
            {n: self.columns[n] for n in names}, self.sample_period, self.flight_id
        )


def concat(frames: Sequence[FlightFrame]) -> FlightFrame:
    """Row-wise concatenation of frames sharing the same column names."""
    if not frames:
        raise DataError("nothing to concatenate")
    names = frames[0].names
    for f in frames[1:]:
        if f.names != names:
            raise DataError("frames have different columns")
    ids = {f.flight_id for f in frames}
    return FlightFrame(
        {n: np.concatenate([f[n] for f in frames]) for n in names},
        frames[0].sample_period,
        ids.pop() if len(ids) == 1 else None,
    )


@dataclass(frozen=True)
class TargetSpec:
    kind: str
    column_names: tuple[str, ...]

    def __post_init__(self):
        expected = {"anomaly_field": 1, "position_3d": 3}
        if self.kind not in expected:
            raise DataError(f"unknown target kind {self.kind!r}")
        object.__setattr__(self, "column_names", tuple(self.column_names))
        if len(self.column_names) != expected[self.kind]:
            raise DataError(
                f"target {self.kind} needs {expected[self.kind]} column(s), "
                f"got {len(self.column_names)}"
            )

    @classmethod
    def anomaly(cls, column: str = DEFAULT_ANOMALY_COLUMN) -> "TargetSpec":
        return cls("anomaly_field", (column,))

    @classmethod
    def position(cls, columns: Sequence[str] = DEFAULT_POSITION_COLUMNS) -> "TargetSpec":
        return cls("position_3d", tuple(columns))

    @property
    def dim(self) -> int:
        return len(self.column_names)

    def values(self, frame: FlightFrame) -> np.ndarray:
        """Target matrix of shape ``(n_rows, dim)``."""
        return frame.matrix(self.column_names)


def _parse_cell(text: str) -> tuple[float, bool]:
    """Return ``(value, parse_failed)``; empty cells are missing, not failures."""
    text = text.strip()
    if not text:
        return math.nan, False
    try:
        return float(text), False
    except ValueError:
        return math.nan, True


def load_flight(
    path: str | Path,
    schema: Sequence[str] | None = None,
    flight_id: str | None = None,
    sample_period: float = SAMPLE_PERIOD,
) -> FlightFrame:
    """Read a comma-delimited flight file.

    Blank or unparseable cells become NaN so they can be imputed later. A
    column where more than half the cells fail to parse is taken as a sign of
    the wrong file and rejected.

    Parameters
    ----------
    path : path-like
        CSV file with a header row.
    schema : sequence of str, optional
        Columns that must be present.
    flight_id : str, optional
        Defaults to the file stem.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"flight file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, no header row") from None
        rows = list(reader)
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    if schema is not None:
        missing = [c for c in schema if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s): {', '.join(missing)}")
    # A row of blank cells is a sample with every value missing; only
    # physically empty lines are skipped.
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"{path}: no data rows")

    n, width = len(rows), len(header)
    data = np.full((n, width), np.nan)
    failures = np.zeros(width, dtype=np.int64)
    for i, row in enumerate(rows):
        if len(row) > width:
            raise DataError(f"{path}: row {i + 2} has {len(row)} fields, header has {width}")
        for j, cell in enumerate(row):
            data[i, j], bad = _parse_cell(cell)
            failures[j] += bad
    bad_cols = [header[j] for j in range(width) if failures[j] > 0.5 * n]
    if bad_cols:
        raise DataError(
            f"{path}: non-numeric values in more than half of column(s): {', '.join(bad_cols)}"
        )
    return FlightFrame(
        {name: data[:, j] for j, name in enumerate(header)},
        sample_period,
        flight_id if flight_id is not None else path.stem,
    )


def _format_cell(value: float) -> str:
    # repr is the shortest string that round-trips the double exactly.
    return "" if math.isnan(value) else repr(float(value))


def write_flight(frame: FlightFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = frame.names
    cols = [frame[n] for n in names]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for i in range(frame.n_rows):
            writer.writerow([_format_cell(c[i]) for c in cols])
    return path


def mark_outliers(
    frame: FlightFrame, k: float = 6.0, columns: Sequence[str] | None = None
) -> FlightFrame:
    """Set cells further than ``k`` interquartile ranges from the column median to NaN."""
    names = frame.names if columns is None else list(columns)
    updates = {}
    for name in names:
        values = frame[name]
        finite = values[~np.isnan(values)]
        if finite.size == 0:
            continue
        q1, med, q3 = np.percentile(finite, [25, 50, 75])
        iqr = q3 - q1
        if iqr == 0:
            continue
        bad = np.abs(values - med) > k * iqr
        if bad.any():
            updates[name] = np.where(bad, np.nan, values)
    return frame.with_columns(updates) if updates else frame


def impute_missing(frame: FlightFrame) -> FlightFrame:
    """Forward-fill each column, then fill any leading gap with the column median."""
    updates = {}
    for name, values in frame.columns.items():
        gaps = np.isnan(values)
        if not gaps.any():
            continue
        if gaps.all():
            raise DataError(f"column {name!r} is entirely missing")
        idx = np.where(~gaps, np.arange(values.size), 0)
        np.maximum.accumulate(idx, out=idx)
        filled = values[idx]
        lead = np.isnan(filled)
        if lead.any():
            filled[lead] = np.median(values[~gaps])
        updates[name] = filled
    return frame.with_columns(updates) if updates else frame


def clean(frame: FlightFrame, outlier_k: float = 6.0) -> FlightFrame:
    """Outlier masking followed by imputation."""
    return impute_missing(mark_outliers(frame, outlier_k))


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    mode: str = "chronological_tail"

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise DataError("test_fraction must lie strictly between 0 and 1")
        if self.mode != "chronological_tail":
            raise DataError(f"unsupported split mode {self.mode!r}")

    def n_test(self, n_rows: int) -> int:
        # Fraction avoids 0.7 * 10 -> 7.000000000000001 -> ceil 8.
        exact = Fraction(self.test_fraction).limit_denominator(10**9) * n_rows
        return math.ceil(exact)


def chronological_split(
    frame: FlightFrame, spec: SplitSpec | float = SplitSpec()
) -> tuple[FlightFrame, FlightFrame]:
    """Hold out the last ``ceil(test_fraction * n)`` rows as the test set."""
    if not isinstance(spec, SplitSpec):
        spec = SplitSpec(float(spec))
    n = frame.n_rows
    if n < 2:
        raise DataError("need at least 2 rows to split")
    n_test = spec.n_test(n)
    if n_test >= n:
        raise DataError(f"test_fraction {spec.test_fraction} leaves no training rows")
    cut = n - n_test
    return frame.take(slice(0, cut)), frame.take(slice(cut, n))


def split_flights(
    frames: Sequence[FlightFrame], spec: SplitSpec = SplitSpec()
) -> tuple[FlightFrame, FlightFrame]:
    """Split every flight chronologically and pool the train and test parts."""
    parts = [chronological_split(f, spec) for f in frames]
    return concat([p[0] for p in parts]), concat([p[1] for p in parts])
