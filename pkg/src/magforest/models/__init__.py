"""Tree-based and nearest-neighbour regressors."""

from __future__ import annotations

from typing import Mapping

from .forest import (
    RandomForestRegressor,
    bootstrap_indices,
    fit_forest,
    out_of_bag,
    tree_seed,
)
from .knn import KNNRegressor, fit_knn
from .tree import DecisionTreeRegressor, TreeNode, fit_tree

MODEL_KINDS = {
    "forest": RandomForestRegressor,
    "tree": DecisionTreeRegressor,
    "knn": KNNRegressor,
}


def model_kind(model) -> str:
    for kind, cls in MODEL_KINDS.items():
        if isinstance(model, cls):
            return kind
    raise TypeError(f"not a supported model: {type(model).__name__}")


def make_model(config: Mapping):
    """Build an unfitted model from ``{"kind": ..., **params}``."""
    params = dict(config)
    kind = params.pop("kind", "forest")
    try:
        cls = MODEL_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {sorted(MODEL_KINDS)}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {kind}: {exc}") from None


def model_config(model) -> dict:
    return {"kind": model_kind(model), **model.get_params()}


def clone(model):
    return make_model(model_config(model))


def predict(model, X):
    return model.predict(X)


__all__ = [
    "DecisionTreeRegressor", "KNNRegressor", "RandomForestRegressor", "TreeNode",
    "bootstrap_indices", "clone", "fit_forest", "fit_knn", "fit_tree", "make_model",
    "model_config", "model_kind", "out_of_bag", "predict", "tree_seed",
]
