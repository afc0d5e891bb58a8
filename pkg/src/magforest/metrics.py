"""Error metrics and the run ledger.

DRMS here is the root-mean-square 3-D distance,
``sqrt(mean_i ||pred_i - truth_i||^2)``, not the 2-D horizontal variant used
in some navigation texts.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


def rmse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} vs {truth.size}")
    if pred.size == 0:
        raise ValueError("rmse of an empty series")
    r = pred - truth
    return float(np.sqrt(np.mean(r * r)))


def drms(pred, truth) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 2 or pred.shape[1] != 3:
        raise ValueError(f"expected matching n x 3 arrays, got {pred.shape} and {truth.shape}")
    if pred.shape[0] == 0:
        raise ValueError("drms of an empty series")
    r = pred - truth
    return float(np.sqrt(np.mean(np.sum(r * r, axis=1))))


def score(pred, truth) -> float:
    """RMSE for scalar targets, DRMS for 3-D positions."""
    truth = np.asarray(truth)
    if truth.ndim == 2 and truth.shape[1] == 3:
        return drms(pred, truth)
    return rmse(pred, truth)


def metric_name(target_dim: int) -> str:
    return "drms_m" if target_dim == 3 else "rmse_nT"


def config_hash(config: Mapping) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class EvalResult:
    split: str
    metric: str
    value: float
    flight_ids: str
    model: str
    config_hash: str

    def __post_init__(self):
        if self.split not in ("train", "test"):
            raise ValueError(f"split must be train or test, got {self.split!r}")
        if self.metric not in ("rmse_nT", "drms_m"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if not self.value >= 0:
            raise ValueError("metric values are non-negative")


@dataclass(frozen=True)
class Summary:
    mean: float
    std: float
    count: int


def experiment_summary(results: Iterable[EvalResult]) -> dict[tuple[str, str, str], Summary]:
    """Mean and population std per (model, split, metric) group."""
    groups: dict[tuple[str, str, str], list[float]] = {}
    for r in results:
        groups.setdefault((r.model, r.split, r.metric), []).append(r.value)
    if not groups:
        raise ValueError("no results to summarise")
    out = {}
    for key, values in sorted(groups.items()):
        if len(values) < 2:
            raise ValueError(f"group {key} has {len(values)} result(s); std needs at least 2")
        arr = np.array(values)
        out[key] = Summary(float(arr.mean()), float(arr.std()), arr.size)
    return out


LEDGER_FIELDS = ("timestamp", "command") + tuple(f.name for f in fields(EvalResult)) + ("artifact",)


def append_ledger(path: str | Path, command: str, timestamp: str,
                  results: Sequence[EvalResult] = (), artifact: str = "") -> None:
    """Append one row per result, or a single bookkeeping row when there are none."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    new = not path.exists()
    with path.open("a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, LEDGER_FIELDS, lineterminator="\n")
        if new:
            writer.writeheader()
        if not results:
            writer.writerow({"timestamp": timestamp, "command": command, "artifact": artifact})
        for r in results:
            row = asdict(r)
            row["value"] = repr(r.value)
            writer.writerow({"timestamp": timestamp, "command": command, "artifact": artifact, **row})


def read_ledger(path: str | Path) -> list[EvalResult]:
    """Evaluation rows of a ledger file; bookkeeping rows are skipped."""
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if not row.get("metric"):
                continue
            out.append(EvalResult(row["split"], row["metric"], float(row["value"]),
                                  row["flight_ids"], row["model"], row["config_hash"]))
    return out
