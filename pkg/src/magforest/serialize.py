"""Versioned JSON model files.

Every artifact is one JSON object::

    {"format": "magforest", "version": 1, "kind": ..., "meta": {...}, "body": {...}}

Floats are written with ``repr``, the shortest decimal that parses back to
the same double, so ``load(save(m))`` reproduces every parameter exactly.
Trees are stored as parallel node arrays with explicit child indices
(``-1`` marks a leaf). Only leaves carry values and only split nodes carry
thresholds; the other entries are ``null`` and load back as NaN. Keys are
sorted and the layout is fixed, so the same model always produces the same
bytes. Paths ending in ``.gz`` are gzip-compressed with a zeroed timestamp.
"""

from __future__ import annotations

import gzip
import io
import json
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .models import DecisionTreeRegressor, KNNRegressor, RandomForestRegressor
from .models.tree import TreeArrays
from .pca import PCAModel
from .preprocess import ScalerParams
from .tolles_lawson import TLCoefficients

FORMAT = "magforest"
VERSION = 1


class FormatError(ValueError):
    pass


def _tree_body(tree: DecisionTreeRegressor) -> dict:
    t = tree.tree_
    if t is None:
        raise FormatError("cannot save an unfitted tree")
    leaf = (t.feature < 0).tolist()
    return {
        "n_features": tree.n_features_,
        "target_dim": tree.target_dim_,
        "feature": t.feature.tolist(),
        "threshold": [None if f else v for f, v in zip(leaf, t.threshold.tolist())],
        "left": t.left.tolist(),
        "right": t.right.tolist(),
        "value": [v if f else None for f, v in zip(leaf, t.value.tolist())],
        "n_samples": t.n_samples.tolist(),
    }


def _tree_from_body(body: Mapping, params: Mapping, squeeze: bool) -> DecisionTreeRegressor:
    tree = DecisionTreeRegressor(**params)
    n = len(body["feature"])
    d = int(body["target_dim"])
    nan_row = [np.nan] * d
    arrays = TreeArrays(
        np.array(body["feature"], dtype=np.int64),
        np.array([np.nan if v is None else v for v in body["threshold"]], dtype=np.float64),
        np.array(body["left"], dtype=np.int64),
        np.array(body["right"], dtype=np.int64),
        np.array([nan_row if v is None else v for v in body["value"]], dtype=np.float64).reshape(n, d),
        np.array(body["n_samples"], dtype=np.int64),
    )
    internal = arrays.feature >= 0
    kids = np.concatenate([arrays.left[internal], arrays.right[internal]])
    if any(len(a) != n for a in arrays) or (kids.size and (kids.min() < 1 or kids.max() >= n)):
        raise FormatError("inconsistent tree node arrays")
    tree.tree_ = arrays
    tree.n_features_ = int(body["n_features"])
    tree.target_dim_ = int(body["target_dim"])
    tree.squeeze_ = squeeze
    return tree


def to_dict(obj: Any) -> tuple[str, dict]:
    """``(kind, body)`` for a supported object."""
    if isinstance(obj, DecisionTreeRegressor):
        return "tree", {"params": obj.get_params(), "squeeze": obj.squeeze_, "tree": _tree_body(obj)}
    if isinstance(obj, RandomForestRegressor):
        if not obj.trees_:
            raise FormatError("cannot save an unfitted forest")
        return "forest", {
            "params": obj.get_params(),
            "squeeze": obj.squeeze_,
            "n_features": obj.n_features_,
            "target_dim": obj.target_dim_,
            "trees": [_tree_body(t) for t in obj.trees_],
        }
    if isinstance(obj, KNNRegressor):
        if not hasattr(obj, "X_"):
            raise FormatError("cannot save an unfitted KNN model")
        return "knn", {"params": obj.get_params(), "squeeze": obj.squeeze_,
                       "X": obj.X_.tolist(), "Y": obj.Y_.tolist()}
    if isinstance(obj, TLCoefficients):
        return "tl", obj.to_dict()
    if isinstance(obj, ScalerParams):
        return "scaler", obj.to_dict()
    if isinstance(obj, PCAModel):
        return "pca", obj.to_dict()
    raise FormatError(f"cannot serialise {type(obj).__name__}")


def from_dict(kind: str, body: Mapping) -> Any:
    if kind == "tree":
        return _tree_from_body(body["tree"], body["params"], bool(body["squeeze"]))
    if kind == "forest":
        forest = RandomForestRegressor(**body["params"])
        forest.trees_ = [_tree_from_body(t, forest._new_tree().get_params(), False) for t in body["trees"]]
        forest.squeeze_ = bool(body["squeeze"])
        forest.n_features_ = int(body["n_features"])
        forest.target_dim_ = int(body["target_dim"])
        return forest
    if kind == "knn":
        knn = KNNRegressor(**body["params"])
        X = np.ascontiguousarray(body["X"], dtype=np.float64)
        Y = np.ascontiguousarray(body["Y"], dtype=np.float64)
        knn.X_, knn.Y_ = X, Y.reshape(X.shape[0], -1)
        knn.n_features_, knn.target_dim_ = X.shape[1], knn.Y_.shape[1]
        knn.squeeze_ = bool(body["squeeze"])
        return knn
    if kind == "tl":
        return TLCoefficients.from_dict(body)
    if kind == "scaler":
        return ScalerParams.from_dict(body)
    if kind == "pca":
        return PCAModel.from_dict(body)
    raise FormatError(f"unknown artifact kind {kind!r}")


def dumps(obj: Any, meta: Mapping | None = None) -> str:
    kind, body = to_dict(obj)
    doc = {"format": FORMAT, "version": VERSION, "kind": kind, "meta": dict(meta or {}), "body": body}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def loads(text: str) -> tuple[Any, dict]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"not a model file: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise FormatError("not a model file")
    if doc.get("version") != VERSION:
        raise FormatError(f"unsupported model file version {doc.get('version')!r}")
    try:
        return from_dict(doc["kind"], doc["body"]), doc.get("meta", {})
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed {doc.get('kind')} artifact: {exc}") from None


def save(obj: Any, path: str | Path, meta: Mapping | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = dumps(obj, meta).encode("utf-8")
    if path.suffix == ".gz":
        buf = io.BytesIO()
        with gzip.GzipFile(filename="", mode="wb", fileobj=buf, mtime=0, compresslevel=1) as gz:
            gz.write(data)
        data = buf.getvalue()
    path.write_bytes(data)
    return path


def load_with_meta(path: str | Path) -> tuple[Any, dict]:
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix == ".gz":
        raw = gzip.decompress(raw)
    return loads(raw.decode("utf-8"))


def load(path: str | Path) -> Any:
    return load_with_meta(path)[0]
