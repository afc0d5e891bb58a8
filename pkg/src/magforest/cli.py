"""Command-line driver: ``magforest <subcommand> [--config run.json] ...``.

Every subcommand reads one JSON run config (missing keys take the defaults
in ``DEFAULT_CONFIG``), writes its artifacts into ``--out`` and appends a row
to ``<out>/ledger.csv``. Artifacts carry no timestamps, so the same config
and seed reproduce them byte for byte; the ledger holds the timestamps.

Exit codes: 0 success, 1 runtime failure, 2 invalid config or arguments.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import serialize
from .dataset import (
    DEFAULT_POSITION_COLUMNS,
    PRESETS,
    TARGET_EQUIVALENT,
    DataError,
    FlightFrame,
    SplitSpec,
    TargetSpec,
    clean,
    load_flight,
    preset,
    split_flights,
    write_flight,
)
from .featsel import feature_importance, forward_sfs, tune_knn, tune_max_depth
from .metrics import EvalResult, append_ledger, config_hash, metric_name, read_ledger, score
from .models import make_model
from .pca import fit_pca, normalized_distance, project
from .preprocess import (
    DEFAULT_VARIANCE_THRESHOLD,
    ScalerParams,
    apply_scaler,
    correlation_matrix,
    fit_scaler,
    variance_filter,
)
from .synth import SynthConfig, gen_flight
from .tolles_lawson import compensate, fit_tl

DEFAULT_CONFIG: dict[str, Any] = {
    "inputs": [],
    "preset": "ins_aided",
    "features": None,
    "candidates": None,
    "exclude_diurnal": False,
    "target": "position",
    "target_columns": None,
    "clean": True,
    "scaler": "minmax",
    "variance_threshold": DEFAULT_VARIANCE_THRESHOLD,
    "split": {"test_fraction": 0.2},
    "model": {"kind": "forest", "n_estimators": 100},
    "pca": {"enabled": False, "components": 12},
    "seed": 0,
    "n_jobs": 1,
    "out": "run",
    "model_file": "model.json.gz",
    "synth": {},
    "sfs": {"max_features": 12, "cv": 5, "n_estimators": 25},
    "importance": {"mode": "permutation", "repeats": 5},
    "tune": {"param": None, "values": None, "cv": 5},
    "tl": {"scalar": "mag_3_uc", "fluxgate": "flux_b", "ridge": 0.0, "band": None,
           "isotropic": False, "input": None},
}

# Keys whose value is a nested section with its own fixed key set.
_SECTIONS = ("split", "pca", "sfs", "importance", "tune", "tl")
# Columns that are ground truth in synthetic flights and never features.
_TRUTH_COLUMNS = ("tt", "anomaly_nt") + DEFAULT_POSITION_COLUMNS
_DEFAULT_SWEEPS = {"max_depth": [5, 10, 15, 20, 25, 30, 35, 40], "n_neighbors": list(range(1, 51))}


class ConfigError(Exception):
    """Invalid configuration or arguments (exit code 2)."""


# --- config -----------------------------------------------------------------

def load_config(path: str | Path | None, overrides: Mapping[str, Any] | None = None) -> dict:
    """Defaults, updated by the JSON file at ``path``, updated by ``overrides``.

    Relative input and output paths in the file are resolved against the
    file's directory; an ``out`` override is taken as given.
    """
    config = copy.deepcopy(DEFAULT_CONFIG)
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        base = path.resolve().parent
        _merge(config, data)
        if "out" in data:
            config["out"] = str(_resolve(base, data["out"]))
    _merge(config, dict(overrides or {}))
    config["inputs"] = [str(_resolve(base, p)) for p in config["inputs"]]
    if config["tl"].get("input"):
        config["tl"]["input"] = str(_resolve(base, config["tl"]["input"]))
    validate_config(config)
    return config


def _resolve(base: Path, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else base / p


def _merge(config: dict, data: Mapping) -> None:
    unknown = sorted(set(data) - set(DEFAULT_CONFIG))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    for key, value in data.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            bad = sorted(set(value) - set(DEFAULT_CONFIG[key]))
            if bad:
                raise ConfigError(f"unknown key(s) in {key!r}: {', '.join(bad)}")
            config[key].update(value)
        elif key in ("model", "synth"):
            if not isinstance(value, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            config[key] = dict(value)
        else:
            config[key] = value


def validate_config(config: Mapping) -> None:
    if not isinstance(config["inputs"], list):
        raise ConfigError("inputs must be a list of flight files")
    if config["features"] is None and config["preset"] not in PRESETS:
        raise ConfigError(f"unknown preset {config['preset']!r}; choose from {sorted(PRESETS)}")
    if config["target"] not in ("position", "anomaly"):
        raise ConfigError("target must be 'position' or 'anomaly'")
    if config["scaler"] not in ("minmax", "standard", None):
        raise ConfigError("scaler must be 'minmax', 'standard' or null")
    if not isinstance(config["variance_threshold"], (int, float)) or config["variance_threshold"] < 0:
        raise ConfigError("variance_threshold must be a non-negative number")
    frac = config["split"]["test_fraction"]
    if not isinstance(frac, (int, float)) or not 0 < frac < 1:
        raise ConfigError("split.test_fraction must lie strictly between 0 and 1")
    try:
        make_model(model_params(config))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not isinstance(config["seed"], int) or config["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    if config["importance"]["mode"] not in ("permutation", "drop", "both"):
        raise ConfigError("importance.mode must be permutation, drop or both")


def model_params(config: Mapping) -> dict:
    """Model config with the run seed and worker count filled in."""
    params = dict(config["model"])
    kind = params.setdefault("kind", "forest")
    if kind in ("forest", "tree"):
        params.setdefault("random_state", config["seed"])
    if kind == "forest":
        params.setdefault("n_jobs", config["n_jobs"])
    return params


def target_spec(config: Mapping) -> TargetSpec:
    cols = config["target_columns"]
    if config["target"] == "position":
        return TargetSpec.position(cols) if cols else TargetSpec.position()
    return TargetSpec.anomaly(cols[0] if isinstance(cols, list) else cols) if cols else TargetSpec.anomaly()


def feature_list(config: Mapping) -> list[str]:
    if config["features"] is not None:
        feats = list(config["features"])
        if config["exclude_diurnal"]:
            feats = [f for f in feats if f != "diurnal"]
        if not feats:
            raise ConfigError("feature list is empty")
        return feats
    return preset(config["preset"], config["exclude_diurnal"])


# --- data -------------------------------------------------------------------

@dataclass
class Data:
    frames: list[FlightFrame]
    train: FlightFrame
    test: FlightFrame
    target: TargetSpec
    features: list[str]
    flight_ids: str


def load_data(config: Mapping, features: Sequence[str] | None = None) -> Data:
    if not config["inputs"]:
        raise ConfigError("no input flights; set 'inputs' in the config")
    target = target_spec(config)
    feats = list(features) if features is not None else feature_list(config)
    frames = []
    for p in config["inputs"]:
        if not Path(p).exists():
            raise ConfigError(f"input file not found: {p}")
        frame = load_flight(p)
        missing_t = [c for c in target.column_names if c not in frame]
        if missing_t:
            raise ConfigError(f"{p}: missing target column(s): {', '.join(missing_t)}")
        missing_f = [c for c in feats if c not in frame]
        if missing_f:
            raise ConfigError(f"{p}: missing feature column(s): {', '.join(missing_f)}")
        frames.append(clean(frame) if config["clean"] else frame)
    if target.kind == "position_3d":
        leaked = [f for f in feats if f in TARGET_EQUIVALENT]
        if leaked:
            raise ConfigError(f"target-equivalent feature(s) with a position target: {', '.join(leaked)}")
    train, test = split_flights(frames, SplitSpec(float(config["split"]["test_fraction"])))
    ids = ",".join(str(f.flight_id) for f in frames)
    return Data(frames, train, test, target, feats, ids)


def _y(target: TargetSpec, frame: FlightFrame) -> np.ndarray:
    Y = target.values(frame)
    return Y[:, 0] if target.dim == 1 else Y


@dataclass
class FeatureMap:
    """Feature transform (scaling, then optional PCA) fitted on training rows."""

    features: list[str]
    scaler: ScalerParams | None
    pca: Any = None

    @classmethod
    def fit(cls, config: Mapping, frame: FlightFrame, features: Sequence[str]) -> "FeatureMap":
        X = frame.matrix(features)
        scaler = fit_scaler(X, config["scaler"], features) if config["scaler"] else None
        fm = cls(list(features), scaler)
        if config["pca"]["enabled"]:
            k = min(int(config["pca"]["components"]), len(features), frame.n_rows - 1)
            fm.pca = fit_pca(fm._scaled(X), k)
        return fm

    def _scaled(self, X):
        return apply_scaler(self.scaler, X) if self.scaler is not None else X

    def transform(self, frame: FlightFrame) -> np.ndarray:
        X = self._scaled(frame.matrix(self.features))
        return project(self.pca, X) if self.pca is not None else X

    def to_dict(self) -> dict:
        return {
            "features": self.features,
            "scaler": self.scaler.to_dict() if self.scaler else None,
            "pca": self.pca.to_dict() if self.pca is not None else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "FeatureMap":
        from .pca import PCAModel

        scaler = ScalerParams.from_dict(data["scaler"]) if data["scaler"] else None
        pca = PCAModel.from_dict(data["pca"]) if data["pca"] else None
        return cls(list(data["features"]), scaler, pca)


def run_hash(config: Mapping, features: Sequence[str]) -> str:
    keys = ("target", "target_columns", "clean", "scaler", "split", "pca", "seed")
    return config_hash({**{k: config[k] for k in keys}, "features": list(features),
                        "model": model_params({**config, "n_jobs": 1})})


def model_tag(config: Mapping) -> str:
    return model_params(config)["kind"]


def candidate_columns(config: Mapping, frame: FlightFrame, target: TargetSpec) -> list[str]:
    if config["candidates"] is not None:
        return list(config["candidates"])
    skip = set(_TRUTH_COLUMNS) | set(target.column_names)
    if target.kind == "position_3d":
        skip |= set(TARGET_EQUIVALENT)
    if config["exclude_diurnal"]:
        skip.add("diurnal")
    return [c for c in frame.names if c not in skip]


# --- output helpers -----------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_json(path: Path, data) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")
    return path


@dataclass
class Run:
    command: str
    config: dict
    out: Path

    @property
    def ledger(self) -> Path:
        return self.out / "ledger.csv"

    def record(self, artifacts: Sequence[Path], results: Sequence[EvalResult] = ()) -> None:
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        names = ";".join(sorted(str(Path(a).name) for a in artifacts))
        append_ledger(self.ledger, self.command, stamp, results, names)


# --- subcommands --------------------------------------------------------------

def cmd_synth(run: Run, args) -> list[Path]:
    params = dict(run.config["synth"])
    seeds = params.pop("seeds", None) or [params.pop("seed", run.config["seed"])]
    paths = []
    for seed in seeds:
        try:
            cfg = SynthConfig.from_dict({"flight_id": str(seed), **params, "seed": int(seed)})
        except TypeError as exc:
            raise ConfigError(f"bad synth parameters: {exc}") from None
        paths.extend(gen_flight(cfg).write(run.out))
    return paths


def cmd_preprocess(run: Run, args) -> list[Path]:
    cfg = run.config
    data = load_data(cfg, features=[])
    cands = candidate_columns(cfg, data.train, data.target)
    scaled = apply_scaler(fit_scaler(data.train.matrix(cands), "minmax", cands), data.train.matrix(cands))
    report = variance_filter(scaled, float(cfg["variance_threshold"]), cands)
    out = [write_csv(run.out / "variance_report.csv", ["feature", "std", "variance", "excluded"],
                     [(f, s, s * s, ex) for f, s, ex in report.rows()])]
    feats = feature_list(cfg)
    data.train.require(feats)
    fm = FeatureMap.fit({**cfg, "pca": {"enabled": False}}, data.train, feats)
    corr, const = correlation_matrix(fm.transform(data.train))
    out.append(write_csv(run.out / "correlation.csv", ["feature", *feats, "constant"],
                         [(f, *corr[i].tolist(), bool(const[i])) for i, f in enumerate(feats)]))
    if fm.scaler is not None:
        out.append(serialize.save(fm.scaler, run.out / "scaler.json"))
    return out


def cmd_select_features(run: Run, args) -> list[Path]:
    cfg = run.config
    data = load_data(cfg, features=[])
    cands = candidate_columns(cfg, data.train, data.target)
    scaled = apply_scaler(fit_scaler(data.train.matrix(cands), "minmax", cands), data.train.matrix(cands))
    keep = list(variance_filter(scaled, float(cfg["variance_threshold"]), cands).retained)
    sfs = cfg["sfs"]
    inner = {**model_params(cfg), "n_estimators": int(sfs["n_estimators"])}
    if inner["kind"] != "forest":
        inner.pop("n_estimators")
    try:
        report = forward_sfs(data.train, keep, data.target, inner, int(sfs["max_features"]),
                             int(sfs["cv"]), int(cfg["n_jobs"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return [write_csv(run.out / "selection.csv", ["step", "feature", "cv_score"],
                      [(i + 1, f, s) for i, (f, s) in enumerate(report.steps)])]


def cmd_pca(run: Run, args) -> list[Path]:
    cfg = run.config
    data = load_data(cfg)
    fm = FeatureMap.fit({**cfg, "pca": {"enabled": False}}, data.train, data.features)
    X = fm.transform(data.train)
    k = min(int(cfg["pca"]["components"]), X.shape[1], X.shape[0] - 1)
    model = fit_pca(X, k)
    scores = project(model, X)
    dist = normalized_distance(scores)
    header = [f"pc{i + 1}" for i in range(k)] + ["normalized_distance"]
    return [
        serialize.save(model, run.out / "pca.json", {"features": data.features}),
        write_csv(run.out / "pca_scores.csv", header,
                  (list(r) + [d] for r, d in zip(scores.tolist(), dist.tolist()))),
        write_csv(run.out / "pca_variance.csv", ["component", "explained_variance", "ratio"],
                  [(i + 1, v, r) for i, (v, r) in enumerate(zip(model.explained_variance.tolist(),
                                                               model.explained_variance_ratio.tolist()))]),
    ]


def _fluxgate_columns(name: str) -> list[str]:
    return [f"{name}_{a}" for a in "xyz"]


def cmd_tl_fit(run: Run, args) -> list[Path]:
    tl = run.config["tl"]
    path = tl["input"] or (run.config["inputs"][0] if run.config["inputs"] else None)
    if path is None:
        raise ConfigError("tl-fit needs tl.input or at least one entry in inputs")
    if not Path(path).exists():
        raise ConfigError(f"input file not found: {path}")
    flux_cols = _fluxgate_columns(tl["fluxgate"])
    frame = load_flight(path)
    missing = [c for c in [tl["scalar"], *flux_cols] if c not in frame]
    if missing:
        raise ConfigError(f"{path}: missing column(s): {', '.join(missing)}")
    if run.config["clean"]:
        frame = clean(frame)
    coeffs = fit_tl(frame[tl["scalar"]], frame.matrix(flux_cols), frame.sample_period,
                    ridge=float(tl["ridge"]), filter_band=tl["band"], isotropic=bool(tl["isotropic"]))
    meta = {"scalar": tl["scalar"], "fluxgate": tl["fluxgate"], "source": Path(path).name}
    return [serialize.save(coeffs, run.out / "tl.json", meta)]


def cmd_tl_apply(run: Run, args) -> list[Path]:
    path = Path(args.model or run.out / "tl.json")
    coeffs, meta = serialize.load_with_meta(path)
    flux_cols = _fluxgate_columns(meta["fluxgate"])
    out = []
    for p in run.config["inputs"]:
        frame = load_flight(p)
        s = frame[meta["scalar"]]
        comp = compensate(s, frame.matrix(flux_cols), coeffs, frame.sample_period)
        frame = frame.with_columns({f"{meta['scalar']}_tl": comp})
        out.append(write_flight(frame, run.out / f"{Path(p).stem}_tl.csv"))
    if not out:
        raise ConfigError("no input flights; set 'inputs' in the config")
    return out


def _fit_model(cfg: Mapping, data: Data):
    fm = FeatureMap.fit(cfg, data.train, data.features)
    model = make_model(model_params(cfg)).fit(fm.transform(data.train), _y(data.target, data.train))
    return fm, model


def _result(cfg, data: Data, split: str, value: float) -> EvalResult:
    return EvalResult(split, metric_name(data.target.dim), value, data.flight_ids,
                      model_tag(cfg), run_hash(cfg, data.features))


def cmd_train(run: Run, args) -> tuple[list[Path], list[EvalResult]]:
    cfg = run.config
    data = load_data(cfg)
    fm, model = _fit_model(cfg, data)
    train_score = score(model.predict(fm.transform(data.train)), _y(data.target, data.train))
    meta = {
        "feature_map": fm.to_dict(),
        "target": {"kind": data.target.kind, "columns": list(data.target.column_names)},
        "config_hash": run_hash(cfg, data.features),
        "flight_ids": data.flight_ids,
    }
    path = serialize.save(model, run.out / cfg["model_file"], meta)
    return [path], [_result(cfg, data, "train", train_score)]


def _load_model(run: Run, args):
    path = Path(args.model) if getattr(args, "model", None) else run.out / run.config["model_file"]
    if not path.exists():
        raise ConfigError(f"model file not found: {path} (run 'train' first)")
    model, meta = serialize.load_with_meta(path)
    fm = FeatureMap.from_dict(meta["feature_map"])
    return model, meta, fm


def cmd_evaluate(run: Run, args) -> tuple[list[Path], list[EvalResult]]:
    if args.pred or args.truth:
        return _evaluate_files(run, args)
    cfg = run.config
    model, meta, fm = _load_model(run, args)
    data = load_data({**cfg, "target_columns": meta["target"]["columns"],
                      "target": "position" if meta["target"]["kind"] == "position_3d" else "anomaly"},
                     features=fm.features)
    results = []
    preds = {}
    for split, frame in (("train", data.train), ("test", data.test)):
        pred = model.predict(fm.transform(frame))
        preds[split] = pred
        results.append(_result(cfg, data, split, score(pred, _y(data.target, frame))))
    cols = list(data.target.column_names)
    truth = data.target.values(data.test)
    pred = preds["test"].reshape(truth.shape[0], -1)
    path = write_csv(run.out / "predictions.csv", [*cols, *[f"pred_{c}" for c in cols]],
                     (list(t) + list(p) for t, p in zip(truth.tolist(), pred.tolist())))
    return [path], results


def _evaluate_files(run: Run, args) -> tuple[list[Path], list[EvalResult]]:
    if not (args.pred and args.truth):
        raise ConfigError("--pred and --truth must be given together")
    for p in (args.pred, args.truth):
        if not Path(p).exists():
            raise ConfigError(f"file not found: {p}")
    pred, truth = load_flight(args.pred), load_flight(args.truth)
    target = target_spec(run.config)
    cols = [c for c in target.column_names]
    for name, frame in (("pred", pred), ("truth", truth)):
        missing = [c for c in cols if c not in frame]
        if missing:
            raise ConfigError(f"{name} file is missing target column(s): {', '.join(missing)}")
    P, T = pred.matrix(cols), truth.matrix(cols)
    if P.shape != T.shape:
        raise ConfigError(f"pred has {P.shape[0]} rows, truth has {T.shape[0]}")
    value = score(P if len(cols) == 3 else P[:, 0], T if len(cols) == 3 else T[:, 0])
    ids = str(truth.flight_id or Path(args.truth).stem)
    result = EvalResult("test", metric_name(len(cols)), value, ids, "external",
                        config_hash({"pred": Path(args.pred).name, "truth": Path(args.truth).name}))
    print(f"{result.metric} {value!r}")
    return [], [result]


def cmd_importance(run: Run, args) -> list[Path]:
    cfg = run.config
    model, meta, fm = _load_model(run, args)
    if fm.pca is not None:
        raise ConfigError("importance is defined on input features; train without PCA")
    data = load_data({**cfg, "target_columns": meta["target"]["columns"],
                      "target": "position" if meta["target"]["kind"] == "position_3d" else "anomaly"},
                     features=fm.features)
    imp = cfg["importance"]
    report = feature_importance(
        model, fm.transform(data.test), _y(data.target, data.test), fm.features,
        mode=imp["mode"], repeats=int(imp["repeats"]), seed=cfg["seed"],
        X_train=fm.transform(data.train), Y_train=_y(data.target, data.train),
    )
    rows = [(r["feature"], r["permutation_delta"], r["permutation_std"], r["drop_delta"]) for r in report.rows()]
    return [write_csv(run.out / "importance.csv",
                      ["feature", "permutation_delta", "permutation_std", "drop_delta"],
                      [("(baseline)", report.baseline, None, None), *rows])]


def cmd_tune(run: Run, args) -> list[Path]:
    cfg = run.config
    data = load_data(cfg)
    params = model_params(cfg)
    kind = params["kind"]
    tune = cfg["tune"]
    param = tune["param"] or ("n_neighbors" if kind == "knn" else "max_depth")
    values = tune["values"] or _DEFAULT_SWEEPS.get(param)
    if values is None:
        raise ConfigError(f"tune.values is required for parameter {param!r}")
    X = data.train.matrix(data.features)
    Y = _y(data.target, data.train)
    cv = int(tune["cv"])
    try:
        if param == "max_depth" and kind in ("forest", "tree"):
            best, curve = tune_max_depth(X, Y, values, params, cv, int(cfg["n_jobs"]))
        elif param == "n_neighbors" and kind == "knn":
            best, curve = tune_knn(X, Y, values, cv, params.get("aggregation", "mean"), cfg["scaler"])
        else:
            raise ConfigError(f"cannot tune {param!r} for model kind {kind!r}")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return [write_csv(run.out / "tune.csv", [param, "cv_score", "best"],
                      [(v, s, v == best) for v, s in curve])]


def cmd_report(run: Run, args) -> list[Path]:
    ledger = Path(args.ledger) if args.ledger else run.ledger
    if not ledger.exists():
        raise ConfigError(f"ledger not found: {ledger}")
    groups: dict[tuple[str, str, str], list[float]] = {}
    for r in read_ledger(ledger):
        groups.setdefault((r.model, r.split, r.metric), []).append(r.value)
    rows = []
    for (model, split, metric), values in sorted(groups.items()):
        arr = np.array(values)
        std = float(arr.std()) if arr.size >= 2 else None
        rows.append((model, split, metric, arr.size, float(arr.mean()), std))
    return [write_csv(run.out / "report.csv", ["model", "split", "metric", "count", "mean", "std"], rows)]


def cmd_plot(run: Run, args) -> list[Path]:
    from . import plots

    return plots.render_all(run.out)


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "select-features": cmd_select_features,
    "pca": cmd_pca,
    "tl-fit": cmd_tl_fit,
    "tl-apply": cmd_tl_apply,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "importance": cmd_importance,
    "tune": cmd_tune,
    "report": cmd_report,
    "plot": cmd_plot,
}

_HELP = {
    "synth": "generate synthetic flights with truth sidecars",
    "preprocess": "fit the scaler and write variance and correlation reports",
    "select-features": "forward feature selection on blocked CV",
    "pca": "fit PCA on the scaled training features",
    "tl-fit": "fit Tolles-Lawson coefficients on a calibration flight",
    "tl-apply": "compensate the input flights with fitted coefficients",
    "train": "fit the configured model on the training split",
    "evaluate": "score a trained model, or a prediction file against truth",
    "importance": "permutation and drop-column feature importance",
    "tune": "sweep max_depth or n_neighbors with blocked CV",
    "report": "summarise ledger results per model and split",
    "plot": "render PNG figures from the run artifacts",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magforest", description=__doc__.split("\n\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--preset", choices=sorted(PRESETS), help="feature preset (overrides config)")
    common.add_argument("--exclude-diurnal", action="store_true", help="drop the diurnal feature")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=_HELP[name])
        if name in ("evaluate", "importance", "tl-apply"):
            p.add_argument("--model", help="model file (default: <out>/model_file or <out>/tl.json)")
        if name == "evaluate":
            p.add_argument("--pred", help="prediction file to score against --truth")
            p.add_argument("--truth", help="ground-truth file")
        if name == "report":
            p.add_argument("--ledger", help="ledger to summarise (default: <out>/ledger.csv)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    overrides: dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if args.preset is not None:
        overrides["preset"] = args.preset
        overrides["features"] = None
    if args.exclude_diurnal:
        overrides["exclude_diurnal"] = True
    try:
        config = load_config(args.config, overrides)
        run = Run(args.command, config, Path(config["out"]))
        run.out.mkdir(parents=True, exist_ok=True)
        outcome = COMMANDS[args.command](run, args)
        artifacts, results = outcome if isinstance(outcome, tuple) else (outcome, [])
        run.record(artifacts, results)
        for r in results:
            print(f"{r.model} {r.split} {r.metric}={r.value:.6g}")
        for a in artifacts:
            print(a)
        return 0
    except ConfigError as exc:
        print(f"magforest: config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ValueError, OSError, KeyError, RuntimeError, ImportError) as exc:
        print(f"magforest: {args.command} failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
