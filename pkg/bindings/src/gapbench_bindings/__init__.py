"""Thin array-level bindings over the gapbench core.

Three functions cover the scripting workflow on plain numeric buffers:
``py_ampute`` removes observed cells under a missingness mechanism,
``py_impute`` fits a registered method on one array and completes another,
and ``py_evaluate`` scores a completion on an evaluation mask. A ``register``
hook adds caller-supplied imputers (plain fit/impute callables) to the same
registry the built-in methods live in.

Missingness always crosses this boundary as an explicit boolean mask, never
as NaN sentinels: inputs must be finite everywhere, and cells an output mask
marks as removed carry a zero placeholder. Every function is a pure function
of its arguments and matches the result of driving the core through its CSV
and CLI surfaces on equal inputs.
"""

from __future__ import annotations

import numpy as np

import gapbench
from gapbench import (
    AmputationConfig,
    Feature,
    ImputerSpec,
    NormalizationStats,
    VitalsFrame,
    ampute_data,
    evaluate,
    fit_normalizer,
)
from gapbench.imputers import Imputer
from gapbench.imputers import register as _core_register

__version__ = "0.1.0"

__all__ = ["py_ampute", "py_impute", "py_evaluate", "register"]


def _check_pair(values, mask, name: str):
    values = np.asarray(values, dtype=np.float64)
    mask = np.asarray(mask)
    if values.ndim != 3:
        raise ValueError(f"{name}: expected a 3-d (stays, timesteps, features) array, got shape {values.shape}")
    if mask.dtype != np.bool_:
        raise ValueError(f"{name}: mask must be boolean")
    if mask.shape != values.shape:
        raise ValueError(f"{name}: mask shape {mask.shape} does not match values shape {values.shape}")
    if not np.isfinite(values).all():
        raise ValueError(f"{name}: values must be finite everywhere; express missingness via the mask")
    return values, mask


def _frame(values: np.ndarray, mask: np.ndarray) -> VitalsFrame:
    n_stays, n_steps, n_feat = values.shape
    cells = np.where(mask, values, np.nan)
    return VitalsFrame(tuple(f"s{i}" for i in range(n_stays)),
                       tuple(np.arange(n_steps) for _ in range(n_stays)),
                       cells, tuple(Feature(f"f{i}") for i in range(n_feat)))


def py_ampute(values, obs_mask, mechanism: str, rate: float, seed: int,
              mar_observed_fraction: float = 0.5):
    """Remove observed cells under ``mechanism`` at ``rate``.

    Returns ``(values_out, amp_mask)``: ``amp_mask`` is True where a cell was
    artificially removed and ``values_out`` equals the input with removed
    cells zeroed. Identical to the ``gapbench ampute`` CLI on the same data.
    """
    values, obs_mask = _check_pair(values, obs_mask, "py_ampute")
    config = AmputationConfig(mechanism, rate, seed, mar_observed_fraction)
    _, amp_mask = ampute_data(_frame(values, obs_mask), obs_mask, config)
    return np.where(amp_mask, 0.0, values), amp_mask


def py_impute(method: str, params: dict | None, train, train_mask, target, target_mask,
              seed: int = 0) -> np.ndarray:
    """Fit ``method`` on the visible cells of ``train`` and complete ``target``.

    Mirrors the CLI path exactly: a normalizer is fitted on the training
    array's visible cells, the method runs in normalized space, synthesized
    cells are mapped back to the raw scale, and visible target cells pass
    through bit-exactly.
    """
    train, train_mask = _check_pair(train, train_mask, "py_impute(train)")
    target, target_mask = _check_pair(target, target_mask, "py_impute(target)")
    if train.shape[2] != target.shape[2]:
        raise ValueError(f"py_impute: train has {train.shape[2]} features, target has {target.shape[2]}")

    stats = fit_normalizer(_frame(train, train_mask), train_mask)
    spec = ImputerSpec(method, dict(params or {}), seed)
    fitted = gapbench.fit(spec, stats.apply(_frame(train, train_mask)), train_mask, stats)
    completed = gapbench.impute(fitted, stats.apply(_frame(target, target_mask)), target_mask)
    return np.where(target_mask, target, stats.invert_values(completed.values))


def py_evaluate(truth, imputed, eval_mask, bins: int = 50, mean=None, std=None) -> dict:
    """Score ``imputed`` against ``truth`` on ``eval_mask``.

    Returns ``{mae_norm, rmse_norm, mae_raw, rmse_raw, jsd}``. Inputs are
    treated as raw-scale values; without explicit per-feature ``mean``/``std``
    the two scales coincide.
    """
    truth = np.asarray(truth, dtype=np.float64)
    full = np.ones(truth.shape, dtype=bool) if truth.ndim == 3 else None
    if full is None:
        raise ValueError(f"py_evaluate: expected 3-d arrays, got shape {truth.shape}")
    truth, _ = _check_pair(truth, full, "py_evaluate(truth)")
    imputed, _ = _check_pair(imputed, full, "py_evaluate(imputed)")
    eval_mask = np.asarray(eval_mask)
    if eval_mask.dtype != np.bool_ or eval_mask.shape != truth.shape:
        raise ValueError("py_evaluate: eval_mask must be boolean with the truth's shape")
    if not eval_mask.any():
        raise ValueError("py_evaluate: evaluation mask is empty")

    n_feat = truth.shape[2]
    mean = np.zeros(n_feat) if mean is None else np.asarray(mean, dtype=np.float64)
    std = np.ones(n_feat) if std is None else np.asarray(std, dtype=np.float64)
    stats = NormalizationStats(mean, std, tuple(f"f{i}" for i in range(n_feat)))
    report = evaluate(stats.apply(_frame(truth, full)), stats.apply(_frame(imputed, full)),
                      eval_mask, stats, jsd_bins=bins)
    return {name: getattr(report, name) for name in
            ("mae_norm", "rmse_norm", "mae_raw", "rmse_raw", "jsd")}


class _CallbackImputer(Imputer):
    """Adapter turning fit/impute callables into a registered method.

    Callback contract: ``fit(train, mask) -> state`` and
    ``impute(state, target, mask) -> array``, all on finite 3-d arrays with
    boolean visibility masks (non-visible entries arrive zeroed).
    """

    REQUIRES_VISIBLE_PER_FEATURE = False

    def __init__(self, params=None, seed=0, fit_fn=None, impute_fn=None, name=""):
        self.name = name
        super().__init__(params, seed)
        self._fit_fn = fit_fn
        self._impute_fn = impute_fn

    @classmethod
    def validate_params(cls, params):
        return dict(params)

    def fit(self, frame, visible):
        self.state_ = self._fit_fn(np.where(visible, frame.values, 0.0), visible)

    def predict(self, frame, visible):
        out = np.asarray(self._impute_fn(self.state_, np.where(visible, frame.values, 0.0), visible),
                         dtype=np.float64)
        if out.shape != frame.values.shape:
            raise ValueError(f"registered imputer {self.name!r} returned shape {out.shape}, "
                             f"expected {frame.values.shape}")
        return out


def register(name: str, fit, impute) -> None:
    """Register a host-language imputer under ``name``.

    The method becomes available to :func:`py_impute` and to the core suite,
    alongside the built-ins.
    """

    def constructor(params, seed):
        return _CallbackImputer(params, seed, fit_fn=fit, impute_fn=impute, name=name)

    _core_register(name, constructor)
