"""Imputation scoring over the amputed-cell set and run aggregation.

Errors are pooled over every evaluation cell across stays (a per-stay
variant sits behind ``per_stay`` for sensitivity checks). MAE and RMSE are
reported both in normalized space and, through the normalizer's scale, on
the raw measurement scale. Distribution recovery is a histogram
Jensen-Shannon divergence per feature, averaged over features; with shared
bin edges spanning both samples the estimate is invariant under the affine
normalization, so one number serves both spaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import NormalizationStats, VitalsFrame


class MetricError(ValueError):
    """Empty evaluation mask or incompatible report combination."""


JSD_DEFAULT_BINS = 50
_SMOOTHING = 1e-12


@dataclass(frozen=True)
class Provenance:
    mechanism: str = ""
    rate: float = 0.0
    method: str = ""
    seed: int = 0
    dataset: str = ""


@dataclass(frozen=True)
class MetricReport:
    mae_norm: float
    rmse_norm: float
    mae_raw: float
    rmse_raw: float
    jsd: float
    n_eval_cells: int
    provenance: Provenance = field(default_factory=Provenance)

    METRIC_FIELDS = ("mae_norm", "rmse_norm", "mae_raw", "rmse_raw", "jsd")

    def __post_init__(self):
        for name in self.METRIC_FIELDS:
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise MetricError(f"{name} must be finite and non-negative, got {v}")
        if self.rmse_norm < self.mae_norm - 1e-9 or self.rmse_raw < self.mae_raw - 1e-9:
            raise MetricError("RMSE below MAE violates the power-mean inequality")
        if not 0.0 <= self.jsd <= 1.0 + 1e-12:
            raise MetricError(f"jsd must lie in [0, 1], got {self.jsd}")


def jsd_histogram(truth_values, imputed_values, n_bins: int = JSD_DEFAULT_BINS) -> float:
    """Histogram Jensen-Shannon divergence, base 2, in [0, 1].

    Both samples are binned on shared edges spanning the union of their
    ranges; the probability histograms get 1e-12 additive smoothing and are
    renormalized. A degenerate range (all values equal in both samples)
    yields 0 by convention.
    """
    truth_values = np.asarray(truth_values, dtype=np.float64).ravel()
    imputed_values = np.asarray(imputed_values, dtype=np.float64).ravel()
    if truth_values.size == 0 or imputed_values.size == 0:
        raise MetricError("jsd_histogram needs two nonempty samples")
    if n_bins < 2:
        raise MetricError("n_bins must be >= 2")
    lo = min(truth_values.min(), imputed_values.min())
    hi = max(truth_values.max(), imputed_values.max())
    if lo == hi:
        return 0.0
    edges = np.linspace(lo, hi, n_bins + 1)
    p = np.histogram(truth_values, bins=edges)[0].astype(np.float64)
    q = np.histogram(imputed_values, bins=edges)[0].astype(np.float64)
    p = (p / p.sum()) + _SMOOTHING
    q = (q / q.sum()) + _SMOOTHING
    p /= p.sum()
    q /= q.sum()
    m = 0.5 * (p + q)
    kl_pm = float(np.sum(p * np.log2(p / m)))
    kl_qm = float(np.sum(q * np.log2(q / m)))
    return 0.5 * kl_pm + 0.5 * kl_qm


def _pooled_errors(err: np.ndarray) -> tuple:
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err * err)))
    return mae, rmse


def _per_stay_errors(err_tensor, eval_mask) -> tuple:
    maes, rmses = [], []
    for s in range(eval_mask.shape[0]):
        cells = eval_mask[s]
        if cells.any():
            e = err_tensor[s][cells]
            maes.append(np.mean(np.abs(e)))
            rmses.append(np.sqrt(np.mean(e * e)))
    return float(np.mean(maes)), float(np.mean(rmses))


def evaluate(truth_frame: VitalsFrame, imputed_frame: VitalsFrame, eval_mask: np.ndarray,
             stats: NormalizationStats, jsd_bins: int = JSD_DEFAULT_BINS,
             per_stay: bool = False, provenance: Provenance | None = None) -> MetricReport:
    """Score an imputation on the amputed cells.

    Frames are in normalized space; raw-scale errors are recovered through
    the normalizer's per-feature scale. ``eval_mask`` must be a subset of
    the truth frame's observed cells.
    """
    eval_mask = np.asarray(eval_mask, dtype=bool)
    if eval_mask.shape != truth_frame.values.shape or imputed_frame.values.shape != truth_frame.values.shape:
        raise MetricError("truth, imputed, and eval mask shapes must agree")
    if not eval_mask.any():
        raise MetricError("evaluation mask is empty")
    if not np.isfinite(truth_frame.values[eval_mask]).all():
        raise MetricError("truth is absent at an evaluation cell")
    if not np.isfinite(imputed_frame.values[eval_mask]).all():
        raise MetricError("imputed frame is absent at an evaluation cell")

    err_norm = imputed_frame.values - truth_frame.values
    err_raw = err_norm * stats.std[None, None, :]
    if per_stay:
        mae_norm, rmse_norm = _per_stay_errors(err_norm, eval_mask)
        mae_raw, rmse_raw = _per_stay_errors(err_raw, eval_mask)
    else:
        mae_norm, rmse_norm = _pooled_errors(err_norm[eval_mask])
        mae_raw, rmse_raw = _pooled_errors(err_raw[eval_mask])

    jsds = []
    for f in range(truth_frame.n_features):
        cells = eval_mask[:, :, f]
        if cells.any():
            jsds.append(jsd_histogram(truth_frame.values[:, :, f][cells],
                                      imputed_frame.values[:, :, f][cells], jsd_bins))
    return MetricReport(mae_norm, rmse_norm, mae_raw, rmse_raw, float(np.mean(jsds)),
                        int(eval_mask.sum()), provenance or Provenance())


@dataclass(frozen=True)
class AggregateCell:
    """Mean and sample standard deviation of each metric over runs."""

    means: dict
    stds: dict
    n_runs: int

    def __post_init__(self):
        if self.n_runs < 1:
            raise MetricError("aggregate needs at least one run")
        if any(v < 0 for v in self.stds.values()):
            raise MetricError("standard deviations must be non-negative")


def aggregate_runs(reports) -> AggregateCell:
    """Aggregate metric means and sample stds (ddof=1; 0 for a single run)
    over reports that share provenance up to the seed."""
    reports = list(reports)
    if not reports:
        raise MetricError("aggregate_runs needs at least one report")
    keys = {(r.provenance.mechanism, r.provenance.rate, r.provenance.method, r.provenance.dataset)
            for r in reports}
    if len(keys) > 1:
        raise MetricError(f"mixed provenance in aggregation: {sorted(keys)}")
    means, stds = {}, {}
    for name in MetricReport.METRIC_FIELDS:
        column = np.array([getattr(r, name) for r in reports], dtype=np.float64)
        means[name] = float(column.mean())
        stds[name] = float(column.std(ddof=1)) if column.size > 1 else 0.0
    return AggregateCell(means, stds, len(reports))
