"""Calibrated artificial-missingness mask generation.

Four mechanisms produce boolean amputation masks (True = artificially
removed) over the observed cells of a frame:

* ``mcar`` removes an exact uniform sample of observed cells.
* ``mar`` keeps a seeded subset of features fully observed and masks the
  rest through per-feature logistic models of the observed features, with
  per-feature rates rescaled so the overall removed fraction hits the target.
* ``mnar`` splits features into logistic-model inputs and outputs, masks the
  outputs through the model, then masks the inputs completely at random, so
  output missingness depends on values that end up unobserved themselves.
* ``bo`` (blackout) removes entire (stay, timestep) rows until the target
  cell count is reached.

Rates denominate over originally observed cells. Logistic coefficients are
scaled to give the linear predictor unit empirical variance, and intercepts
are calibrated by bisection so the mean masking probability matches the
per-feature target. All draws derive from hashed per-(seed, mechanism,
feature) streams, so masks are pure functions of (frame, config).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import VitalsFrame
from .rng import derive_rng

MECHANISMS = ("mcar", "mar", "mnar", "bo")

MAX_PER_FEATURE_RATE = 0.99
INTERCEPT_TOL = 1e-6
INTERCEPT_MAX_ITER = 100


class AmputationError(ValueError):
    """Invalid configuration or unattainable missingness target."""


@dataclass(frozen=True)
class AmputationConfig:
    """Mechanism, target rate over observed cells, seed, and MAR options.

    ``rate`` is the fraction of originally observed cells to remove, strictly
    inside (0, 1). ``mar_observed_fraction`` is the fraction of features kept
    fully observed under MAR; it must leave at least one observed and one
    maskable feature for the frame it is applied to.
    """

    mechanism: str
    rate: float
    seed: int
    mar_observed_fraction: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "mechanism", str(self.mechanism).lower())
        if self.mechanism not in MECHANISMS:
            raise AmputationError(f"unknown mechanism {self.mechanism!r}; expected one of {MECHANISMS}")
        if not 0.0 < self.rate < 1.0:
            raise AmputationError(f"rate must lie strictly in (0, 1), got {self.rate}")
        if not 0.0 < self.mar_observed_fraction < 1.0:
            raise AmputationError("mar_observed_fraction must lie strictly in (0, 1)")


@dataclass(frozen=True)
class LogisticMaskModel:
    """Per-target-feature logistic masking model.

    ``coeffs`` are scaled so the linear predictor has unit empirical variance
    over rows with at least one observed input cell; ``intercept`` is
    calibrated so the mean masking probability over the target feature's
    observed cells equals the rescaled per-feature rate. Rows with absent
    input cells use ``fill_means`` (the frame-wide observed mean per input
    feature) in the predictor.
    """

    coeffs: np.ndarray
    intercept: float
    input_features: tuple
    target_feature: int
    fill_means: np.ndarray

    def predictor(self, values_rows: np.ndarray, obs_rows: np.ndarray) -> np.ndarray:
        """Linear predictor per row; absent inputs are mean-filled."""
        x = _filled_inputs(values_rows, obs_rows, self.input_features, self.fill_means)
        return x @ self.coeffs

    def scaling_rows(self, obs_rows: np.ndarray) -> np.ndarray:
        """Rows whose predictor variance was normalized to one."""
        return obs_rows[:, list(self.input_features)].any(axis=1)

    def probabilities(self, values_rows: np.ndarray, obs_rows: np.ndarray) -> np.ndarray:
        return _sigmoid(self.predictor(values_rows, obs_rows) + self.intercept)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _filled_inputs(values_rows, obs_rows, input_features, fill_means) -> np.ndarray:
    idx = list(input_features)
    x = values_rows[:, idx].copy()
    absent = ~obs_rows[:, idx]
    x[absent] = np.broadcast_to(fill_means, x.shape)[absent]
    return x


def calibrate_intercept(predictors: np.ndarray, target_rate: float) -> float:
    """Bisect the intercept so ``mean(sigmoid(t + b))`` hits ``target_rate``.

    The objective is continuous and strictly increasing in ``b``, so
    bisection over an enclosing bracket converges; iteration stops once the
    objective is within 1e-6 of the target or after 100 halvings.
    """
    t = np.asarray(predictors, dtype=np.float64).ravel()
    if t.size == 0:
        raise AmputationError("calibrate_intercept needs at least one predictor value")
    if not 0.0 < target_rate < 1.0:
        raise AmputationError(f"target rate must lie strictly in (0, 1), got {target_rate}")
    span = float(np.max(np.abs(t))) + 50.0
    lo, hi = -span, span
    for _ in range(INTERCEPT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        err = float(_sigmoid(t + mid).mean()) - target_rate
        if abs(err) <= INTERCEPT_TOL:
            return mid
        if err < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _fit_logistic_model(values_rows, obs_rows, input_features, target_feature,
                        target_rate, seed, mechanism, force_positive=False):
    """Draw, scale, and calibrate one per-target-feature masking model."""
    coeffs = derive_rng("ampute", mechanism, "coeffs", seed, target_feature).standard_normal(len(input_features))
    if force_positive:
        coeffs = np.abs(coeffs)
    fill_means = np.array([values_rows[obs_rows[:, f], f].mean() if obs_rows[:, f].any() else 0.0
                           for f in input_features])
    x = _filled_inputs(values_rows, obs_rows, input_features, fill_means)
    t = x @ coeffs
    rows = obs_rows[:, list(input_features)].any(axis=1)
    if not rows.any():
        raise AmputationError("logistic masking model has no observed input cells")
    scale = max(float(t[rows].std()), 1e-12)
    coeffs = coeffs / scale
    t = t / scale
    target_rows = obs_rows[:, target_feature]
    intercept = calibrate_intercept(t[target_rows], target_rate)
    return LogisticMaskModel(coeffs, intercept, tuple(input_features), int(target_feature), fill_means), t


def _rescaled_rate(rate, obs_mask, maskable_features) -> float:
    n_total = int(obs_mask.sum())
    n_maskable = int(obs_mask[..., list(maskable_features)].sum())
    if n_maskable == 0:
        raise AmputationError("no observed cells in the maskable features")
    per_rate = rate * n_total / n_maskable
    if per_rate > MAX_PER_FEATURE_RATE:
        raise AmputationError(
            f"rate unattainable under MAR with this observed fraction: per-feature "
            f"target {per_rate:.3f} exceeds {MAX_PER_FEATURE_RATE}")
    return per_rate


def mcar_mask(obs_mask: np.ndarray, rate: float, seed: int) -> np.ndarray:
    """Uniform sample, without replacement, of exactly round(rate * n_obs)
    observed cells; independent of the values."""
    obs_mask = np.asarray(obs_mask, dtype=bool)
    flat_obs = np.flatnonzero(obs_mask)
    if flat_obs.size == 0:
        raise AmputationError("mcar_mask needs at least one observed cell")
    k = int(round(rate * flat_obs.size))
    mask = np.zeros(obs_mask.shape, dtype=bool)
    if k > 0:
        picked = derive_rng("ampute", "mcar", seed).choice(flat_obs.size, size=k, replace=False)
        mask.flat[flat_obs[picked]] = True
    return mask


def mar_mask(frame: VitalsFrame, obs_mask: np.ndarray, rate: float, seed: int,
             mar_observed_fraction: float = 0.5, return_models: bool = False):
    """Missing-at-random mask: a seeded subset of features stays fully
    observed; the rest are masked by logistic models of the observed features
    at per-feature rates rescaled to hit the overall target."""
    obs_mask = np.asarray(obs_mask, dtype=bool)
    n_feat = frame.n_features
    if n_feat < 2:
        raise AmputationError("MAR needs at least two features")
    n_obs_feat = math.ceil(n_feat * mar_observed_fraction - 1e-9)
    if n_obs_feat < 1 or n_obs_feat >= n_feat:
        raise AmputationError(
            f"mar_observed_fraction {mar_observed_fraction} must keep between 1 and {n_feat - 1} features observed")
    input_features = np.sort(derive_rng("ampute", "mar", "inputs", seed).choice(n_feat, n_obs_feat, replace=False))
    maskable = [f for f in range(n_feat) if f not in set(input_features.tolist())]
    per_rate = _rescaled_rate(rate, obs_mask, maskable)

    values_rows = frame.values.reshape(-1, n_feat)
    obs_rows = obs_mask.reshape(-1, n_feat)
    mask_rows = np.zeros_like(obs_rows)
    models = []
    for f in maskable:
        if not obs_rows[:, f].any():
            continue
        model, t = _fit_logistic_model(values_rows, obs_rows, input_features, f, per_rate, seed, "mar")
        probs = _sigmoid(t + model.intercept)
        u = derive_rng("ampute", "mar", "draw", seed, f).random(obs_rows.shape[0])
        mask_rows[:, f] = obs_rows[:, f] & (u < probs)
        models.append(model)
    mask = mask_rows.reshape(obs_mask.shape)
    return (mask, models) if return_models else mask


def mnar_mask(frame: VitalsFrame, obs_mask: np.ndarray, rate: float, seed: int,
              force_positive_coeffs: bool = False, return_models: bool = False):
    """Missing-not-at-random mask.

    Features are split half/half (seeded, inputs take the extra on odd
    counts) into logistic-model inputs and outputs. Output cells are masked
    through models of the original input values; input cells are then masked
    completely at random at the same per-feature rate, so output missingness
    depends on values that are themselves partially removed.

    ``force_positive_coeffs`` is a test hook that takes the absolute value of
    the drawn coefficients so predictor quantiles align with input magnitude.
    """
    obs_mask = np.asarray(obs_mask, dtype=bool)
    n_feat = frame.n_features
    if n_feat < 2:
        raise AmputationError("MNAR needs at least two features")
    perm = derive_rng("ampute", "mnar", "split", seed).permutation(n_feat)
    n_inputs = (n_feat + 1) // 2
    input_features = np.sort(perm[:n_inputs])
    output_features = np.sort(perm[n_inputs:])
    per_rate = _rescaled_rate(rate, obs_mask, range(n_feat))

    values_rows = frame.values.reshape(-1, n_feat)
    obs_rows = obs_mask.reshape(-1, n_feat)
    mask_rows = np.zeros_like(obs_rows)
    models = []
    for f in output_features:
        if not obs_rows[:, f].any():
            continue
        model, t = _fit_logistic_model(values_rows, obs_rows, input_features, f, per_rate, seed,
                                       "mnar", force_positive=force_positive_coeffs)
        probs = _sigmoid(t + model.intercept)
        u = derive_rng("ampute", "mnar", "draw", seed, f).random(obs_rows.shape[0])
        mask_rows[:, f] = obs_rows[:, f] & (u < probs)
        models.append(model)
    for f in input_features:
        obs_f = np.flatnonzero(obs_rows[:, f])
        k = int(round(per_rate * obs_f.size))
        if k > 0:
            picked = derive_rng("ampute", "mnar", "inputmask", seed, int(f)).choice(obs_f.size, size=k, replace=False)
            mask_rows[obs_f[picked], f] = True
    mask = mask_rows.reshape(obs_mask.shape)
    return (mask, models) if return_models else mask


def blackout_mask(obs_mask: np.ndarray, rate: float, seed: int) -> np.ndarray:
    """Remove whole (stay, timestep) rows, selected uniformly, until the
    masked observed-cell count first reaches round(rate * n_obs)."""
    obs_mask = np.asarray(obs_mask, dtype=bool)
    rows_obs = obs_mask.reshape(-1, obs_mask.shape[-1])
    widths = rows_obs.sum(axis=1)
    candidates = np.flatnonzero(widths > 0)
    if candidates.size == 0:
        raise AmputationError("blackout_mask needs at least one row with an observed cell")
    target = int(round(rate * int(widths.sum())))
    mask_rows = np.zeros_like(rows_obs)
    order = derive_rng("ampute", "bo", seed).permutation(candidates.size)
    covered = 0
    for i in order:
        if covered >= target:
            break
        row = candidates[i]
        mask_rows[row] = rows_obs[row]
        covered += int(widths[row])
    return mask_rows.reshape(obs_mask.shape)


def ampute_data(frame: VitalsFrame, obs_mask: np.ndarray, config: AmputationConfig):
    """Dispatch to the configured mechanism and apply the mask.

    Returns ``(amputed_frame, amputation_mask)`` where the amputed frame
    equals the input with masked cells set absent. Deterministic in
    (frame, config); the mask is always a subset of the observation mask.
    """
    obs_mask = np.asarray(obs_mask, dtype=bool)
    if obs_mask.shape != frame.values.shape:
        raise AmputationError("observation mask shape does not match the frame")
    if not obs_mask.any():
        raise AmputationError("frame has no observed cells to ampute")
    if config.mechanism == "mcar":
        mask = mcar_mask(obs_mask, config.rate, config.seed)
    elif config.mechanism == "mar":
        mask = mar_mask(frame, obs_mask, config.rate, config.seed, config.mar_observed_fraction)
    elif config.mechanism == "mnar":
        mask = mnar_mask(frame, obs_mask, config.rate, config.seed)
    else:
        mask = blackout_mask(obs_mask, config.rate, config.seed)
    values = frame.values.copy()
    values[mask] = np.nan
    return frame.with_values(values), mask


def achieved_rate(amp_mask: np.ndarray, obs_mask: np.ndarray) -> float:
    """Fraction of originally observed cells that are artificially removed."""
    n_obs = int(np.asarray(obs_mask, dtype=bool).sum())
    if n_obs == 0:
        raise AmputationError("no observed cells")
    return float(np.asarray(amp_mask, dtype=bool).sum()) / n_obs
