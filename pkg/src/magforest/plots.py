"""PNG figures from the CSV reports in a run directory (needs matplotlib)."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def _pyplot():
    try:
        import matplotlib
    except ImportError:
        raise ImportError("plotting needs matplotlib; install the 'plot' extra") from None
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _read(path: Path) -> tuple[list[str], list[list[str]]]:
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _num(s: str) -> float:
    return float(s) if s else np.nan


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    return path


def plot_variance(src: Path, dst: Path) -> Path:
    plt = _pyplot()
    _, rows = _read(src)
    names = [r[0] for r in rows]
    stds = [_num(r[1]) for r in rows]
    colors = ["tab:red" if r[3] == "1" else "tab:blue" for r in rows]
    fig, ax = plt.subplots(figsize=(8, max(3, 0.22 * len(rows))))
    ax.barh(names[::-1], stds[::-1], color=colors[::-1])
    ax.set_xlabel("std after min-max scaling")
    return _save(fig, dst)


def plot_importance(src: Path, dst: Path) -> Path:
    plt = _pyplot()
    _, rows = _read(src)
    rows = [r for r in rows if r[0] != "(baseline)"]
    names = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(8, max(3, 0.3 * len(rows))))
    y = np.arange(len(rows))
    perm = [_num(r[1]) for r in rows]
    drop = [_num(r[3]) for r in rows]
    if not np.all(np.isnan(perm)):
        ax.barh(y - 0.2, perm, height=0.4, label="permutation")
    if not np.all(np.isnan(drop)):
        ax.barh(y + 0.2, drop, height=0.4, label="drop column")
    ax.set_yticks(y, names)
    ax.axvline(0, color="k", lw=0.5)
    ax.set_xlabel("error increase over baseline")
    ax.legend()
    return _save(fig, dst)


def plot_tune(src: Path, dst: Path) -> Path:
    plt = _pyplot()
    header, rows = _read(src)
    x = [_num(r[0]) for r in rows]
    y = [_num(r[1]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, y, "o-")
    ax.set_xlabel(header[0])
    ax.set_ylabel("cross-validated error")
    return _save(fig, dst)


def plot_pca(src: Path, dst: Path) -> Path:
    plt = _pyplot()
    header, rows = _read(src)
    data = np.array([[_num(v) for v in r] for r in rows])
    fig, ax = plt.subplots(figsize=(6, 5))
    if data.shape[1] >= 3:
        sc = ax.scatter(data[:, 0], data[:, 1], c=data[:, -1], s=2, cmap="viridis")
        fig.colorbar(sc, ax=ax, label="normalized distance")
    ax.set_xlabel("pc1")
    ax.set_ylabel("pc2")
    return _save(fig, dst)


def plot_track(src: Path, dst: Path) -> Path:
    plt = _pyplot()
    header, rows = _read(src)
    data = np.array([[_num(v) for v in r] for r in rows])
    d = len(header) // 2
    fig, ax = plt.subplots(figsize=(6, 5))
    if d == 3:
        ax.plot(data[:, 0], data[:, 1], "k-", lw=1, label="true")
        ax.plot(data[:, 3], data[:, 4], "r.", ms=1, label="predicted")
        ax.set_aspect("equal")
    else:
        ax.plot(data[:, 0], "k-", lw=1, label="true")
        ax.plot(data[:, 1], "r-", lw=0.8, label="predicted")
    ax.legend()
    return _save(fig, dst)


_RENDERERS = {
    "variance_report.csv": ("variance.png", plot_variance),
    "importance.csv": ("importance.png", plot_importance),
    "tune.csv": ("tune.png", plot_tune),
    "pca_scores.csv": ("pca.png", plot_pca),
    "predictions.csv": ("predictions.png", plot_track),
}


def render_all(run_dir: str | Path) -> list[Path]:
    """Render a figure for every known report present in ``run_dir``."""
    run_dir = Path(run_dir)
    out = []
    for src, (dst, fn) in _RENDERERS.items():
        if (run_dir / src).exists():
            plt = _pyplot()
            out.append(fn(run_dir / src, run_dir / dst))
            plt.close("all")
    if not out:
        raise FileNotFoundError(f"no reports to plot in {run_dir}")
    return out
