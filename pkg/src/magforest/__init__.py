"""Random-forest regression of the aeromagnetic anomaly field and aircraft position.

Modules: ``dataset`` (flight tables, presets, splits), ``preprocess``
(scaling, variance filter, correlation), ``pca``, ``models`` (tree, forest,
KNN), ``tolles_lawson`` (aircraft-field compensation), ``featsel``
(forward selection, importance, sweeps), ``metrics``, ``synth`` (synthetic
flights with ground truth), ``serialize`` and ``cli``.
"""

from .dataset import FlightFrame, SplitSpec, TargetSpec, chronological_split, load_flight, preset
from .metrics import drms, rmse
from .models import (
    DecisionTreeRegressor,
    KNNRegressor,
    RandomForestRegressor,
    fit_forest,
    fit_knn,
    fit_tree,
)
from .tolles_lawson import TLCoefficients, compensate, fit_tl

__version__ = "0.1.0"

__all__ = [
    "DecisionTreeRegressor", "FlightFrame", "KNNRegressor", "RandomForestRegressor",
    "SplitSpec", "TLCoefficients", "TargetSpec", "chronological_split", "compensate",
    "drms", "fit_forest", "fit_knn", "fit_tl", "fit_tree", "load_flight", "preset", "rmse",
]
