"""Data-characteristics analyses: missingness correlation and informative
missingness by outcome.

Rates and indicators pool over all (stay, timestep) rows inside each stay's
time grid; padded tensor rows are excluded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import VitalsFrame


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class MissingnessCorrelation:
    """Pearson correlations of per-feature missingness indicators.

    Constant indicator columns (never or always missing) have no defined
    correlation; by convention their off-diagonal entries are 0 and the
    diagonal stays 1.
    """

    matrix: np.ndarray
    feature_names: tuple


@dataclass(frozen=True)
class InformativeMissingnessReport:
    """Per-feature missing rates by outcome class and their ranking.

    ``rows`` holds one ``(feature, rate_survivor, rate_nonsurvivor,
    abs_difference)`` tuple per feature, in feature order; ``top`` lists the
    ``top_k`` feature names ranked by descending absolute difference (ties
    keep feature order).
    """

    rows: tuple
    top: tuple


def missingness_correlation(frame: VitalsFrame, obs_mask: np.ndarray) -> MissingnessCorrelation:
    """Correlate per-feature missingness indicators over all rows."""
    obs_mask = np.asarray(obs_mask, dtype=bool)
    valid = frame.valid_rows().reshape(-1)
    indicators = (~obs_mask).reshape(-1, frame.n_features)[valid].astype(np.float64)
    if indicators.shape[0] < 2:
        raise AnalysisError("missingness correlation needs at least two rows")
    centered = indicators - indicators.mean(axis=0)
    stds = centered.std(axis=0)
    n_feat = frame.n_features
    matrix = np.zeros((n_feat, n_feat))
    nonconst = stds > 0
    if nonconst.any():
        z = centered[:, nonconst] / stds[nonconst]
        sub = (z.T @ z) / indicators.shape[0]
        matrix[np.ix_(nonconst, nonconst)] = np.clip(sub, -1.0, 1.0)
    np.fill_diagonal(matrix, 1.0)
    return MissingnessCorrelation(matrix, frame.feature_names)


def informative_missingness(frame: VitalsFrame, obs_mask: np.ndarray,
                            outcome: np.ndarray | None = None,
                            top_k: int = 5) -> InformativeMissingnessReport:
    """Compare per-feature missing rates between survivors and non-survivors."""
    if outcome is None:
        outcome = frame.outcome
    if outcome is None:
        raise AnalysisError("informative missingness needs an outcome label per stay")
    outcome = np.asarray(outcome)
    if outcome.shape != (frame.n_stays,):
        raise AnalysisError("outcome must be defined for every stay")
    if top_k < 1:
        raise AnalysisError("top_k must be >= 1")
    obs_mask = np.asarray(obs_mask, dtype=bool)
    valid = frame.valid_rows()
    rates = {}
    for label in (0, 1):
        stays = np.flatnonzero(outcome == label)
        if stays.size == 0:
            raise AnalysisError("both outcome classes must be nonempty")
        missing = ~obs_mask[stays] & valid[stays][:, :, None]
        rates[label] = missing.sum(axis=(0, 1)) / valid[stays].sum()
    diff = np.abs(rates[0] - rates[1])
    order = np.argsort(-diff, kind="stable")
    rows = tuple((frame.feature_names[f], float(rates[0][f]), float(rates[1][f]), float(diff[f]))
                 for f in range(frame.n_features))
    top = tuple(frame.feature_names[f] for f in order[: min(top_k, frame.n_features)])
    return InformativeMissingnessReport(rows, top)
