"""Pluggable imputation methods behind one fit/impute contract."""

from .base import (
    FittedImputer,
    ImputationError,
    Imputer,
    ImputerSpec,
    available_methods,
    fit,
    impute,
    lookup,
    register,
)
from .baselines import LocfImputer, MeanImputer, MedianImputer, MostFrequentImputer, ZeroImputer
from .forest import RandomForestRegressor, RegressionTree
from .mice import MiceImputer
from .missforest import MissForestImputer
from .mlp import AdamState, MlpImputer, MlpNet

BUILTIN_METHODS = (
    ZeroImputer,
    MeanImputer,
    MedianImputer,
    MostFrequentImputer,
    LocfImputer,
    MiceImputer,
    MissForestImputer,
    MlpImputer,
)

for _cls in BUILTIN_METHODS:
    register(_cls.name, _cls)

__all__ = [
    "AdamState",
    "BUILTIN_METHODS",
    "FittedImputer",
    "ImputationError",
    "Imputer",
    "ImputerSpec",
    "LocfImputer",
    "MeanImputer",
    "MedianImputer",
    "MiceImputer",
    "MissForestImputer",
    "MlpImputer",
    "MlpNet",
    "MostFrequentImputer",
    "RandomForestRegressor",
    "RegressionTree",
    "ZeroImputer",
    "available_methods",
    "fit",
    "impute",
    "lookup",
    "register",
]
