"""Uniform fit/impute contract and the method registry.

Every imputation method is a class with ``fit(frame, visible)`` and
``predict(frame, visible)``; :func:`fit` wraps a fitted instance into a
:class:`FittedImputer` and :func:`impute` applies it, centrally enforcing the
two suite laws: visible cells pass through bit-exactly and the output is
complete (no absent cells).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dataset import NormalizationStats, VitalsFrame


class ImputationError(ValueError):
    """Unknown method, bad hyperparameters, or a failed fit."""


class Imputer:
    """Base class for imputation methods.

    Subclasses declare ``name`` and a ``PARAMS`` mapping of allowed
    hyperparameter keys to defaults, implement ``fit`` and ``predict``, and
    may override ``validate_params`` for extra checks. ``predict`` returns a
    fully finite value tensor; pass-through of visible cells is enforced by
    :func:`impute`, not by the method.
    """

    name = ""
    PARAMS: dict = {}
    REQUIRES_VISIBLE_PER_FEATURE = True

    def __init__(self, params: dict | None = None, seed: int = 0):
        self.params = self.validate_params(dict(params or {}))
        self.seed = int(seed)
        self.fitted_ = False

    @classmethod
    def validate_params(cls, params: dict) -> dict:
        unknown = sorted(set(params) - set(cls.PARAMS))
        if unknown:
            raise ImputationError(
                f"{cls.name}: unknown hyperparameters {unknown}; allowed keys are {sorted(cls.PARAMS)}")
        merged = dict(cls.PARAMS)
        merged.update(params)
        return merged

    def fit(self, frame: VitalsFrame, visible: np.ndarray) -> None:
        raise NotImplementedError

    def predict(self, frame: VitalsFrame, visible: np.ndarray) -> np.ndarray:
        raise NotImplementedError


_REGISTRY: dict = {}


def register(name: str, constructor) -> None:
    """Register an imputation method constructor under a unique name.

    The constructor is called as ``constructor(params, seed)`` and must
    return an object with ``fit``/``predict``.
    """
    if name in _REGISTRY:
        raise ImputationError(f"method {name!r} is already registered")
    _REGISTRY[name] = constructor


def lookup(name: str):
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ImputationError(
            f"unknown method {name!r}; registered methods: {', '.join(available_methods())}") from None


def available_methods() -> tuple:
    return tuple(sorted(_REGISTRY))


@dataclass(frozen=True)
class ImputerSpec:
    """A registered method name, its hyperparameters, and a seed.

    Resolving the name and validating the hyperparameters happen at
    construction, so a bad spec fails before any grid cell runs.
    """

    name: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        lookup(self.name)(dict(self.params), self.seed)

    def build(self) -> Imputer:
        return lookup(self.name)(dict(self.params), self.seed)


@dataclass(frozen=True)
class FittedImputer:
    """Immutable fitted state plus the stats the data was normalized with."""

    name: str
    state: Imputer
    stats: NormalizationStats | None
    feature_names: tuple


def fit(spec: ImputerSpec, train_frame: VitalsFrame, visible_mask: np.ndarray,
        stats: NormalizationStats | None = None) -> FittedImputer:
    """Fit a method on the visible cells of the training frame.

    ``visible_mask`` marks the cells the method may read (observed and not
    amputed). Statistical methods require at least one visible cell per
    feature.
    """
    visible_mask = np.asarray(visible_mask, dtype=bool)
    if visible_mask.shape != train_frame.values.shape:
        raise ImputationError("visible mask shape does not match the frame")
    method = spec.build()
    if method.REQUIRES_VISIBLE_PER_FEATURE:
        counts = visible_mask.sum(axis=(0, 1))
        if (counts == 0).any():
            empty = [train_frame.feature_names[f] for f in np.flatnonzero(counts == 0)]
            raise ImputationError(f"features with zero visible cells: {empty}")
    method.fit(train_frame, visible_mask)
    method.fitted_ = True
    return FittedImputer(spec.name, method, stats, train_frame.feature_names)


def impute(fitted: FittedImputer, frame: VitalsFrame, visible_mask: np.ndarray) -> VitalsFrame:
    """Complete a frame: copy visible cells through, synthesize the rest."""
    visible_mask = np.asarray(visible_mask, dtype=bool)
    if frame.n_features != len(fitted.feature_names):
        raise ImputationError(
            f"frame has {frame.n_features} features but the imputer was fitted on {len(fitted.feature_names)}")
    if visible_mask.shape != frame.values.shape:
        raise ImputationError("visible mask shape does not match the frame")
    if (visible_mask & ~np.isfinite(frame.values)).any():
        raise ImputationError("visible mask marks a cell that has no value")
    synthesized = np.asarray(fitted.state.predict(frame, visible_mask), dtype=np.float64)
    if synthesized.shape != frame.values.shape:
        raise ImputationError(f"method returned shape {synthesized.shape}, expected {frame.values.shape}")
    completed = np.where(visible_mask, frame.values, synthesized)
    if not np.isfinite(completed).all():
        raise ImputationError(f"method {fitted.name!r} left non-finite cells in its output")
    return frame.with_values(completed)
