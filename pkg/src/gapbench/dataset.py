"""In-memory data model, columnar CSV I/O, normalization, splitting, and a
synthetic vital-sign generator.

A :class:`VitalsFrame` is a dense ``stays x timesteps x features`` tensor of
float64 values where ``NaN`` marks an absent (natively missing) cell. The
boolean observation mask is always derivable as ``np.isfinite(values)``;
operations still pass masks explicitly so that amputed frames can be scored
against the pre-amputation truth.

Stays may have different lengths. The tensor is padded to the longest stay
and padded cells are absent everywhere; ``time_grid`` records each stay's
actual hour stamps (strictly increasing, 1-hour spacing).
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .rng import derive_rng


class DatasetError(ValueError):
    """Malformed file, schema violation, or invalid construction argument."""


@dataclass(frozen=True)
class Feature:
    name: str
    unit: str = ""


DEFAULT_FEATURES = (
    Feature("hr", "bpm"),
    Feature("resp", "breaths/min"),
    Feature("o2sat", "%"),
    Feature("map", "mmHg"),
    Feature("sbp", "mmHg"),
    Feature("dbp", "mmHg"),
)

# Broad plausibility bounds; they only clip the synthetic generator.
_SYNTH_CLIP = {
    "hr": (30.0, 220.0),
    "resp": (4.0, 60.0),
    "o2sat": (50.0, 100.0),
    "sbp": (50.0, 250.0),
    "dbp": (20.0, 150.0),
}


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class VitalsFrame:
    """Immutable multivariate time-series tensor with per-stay metadata.

    Attributes
    ----------
    stay_ids : tuple of str
        Opaque stay identifiers, one per tensor row.
    time_grid : tuple of int arrays
        Hour stamps per stay; strictly increasing with 1-hour spacing.
    values : float64 array, shape (stays, timesteps, features)
        ``NaN`` marks an absent cell; every present value is finite.
    features : tuple of Feature
    outcome : int8 array of shape (stays,) or None
        1 = died in ICU, 0 = survived.
    """

    stay_ids: tuple
    time_grid: tuple
    values: np.ndarray
    features: tuple = DEFAULT_FEATURES
    outcome: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3:
            raise DatasetError(f"values must be 3-d (stays, timesteps, features), got shape {values.shape}")
        n_stays, n_steps, n_feat = values.shape
        if n_feat < 1:
            raise DatasetError("at least one feature is required")
        if len(self.features) != n_feat:
            raise DatasetError(f"{len(self.features)} feature descriptors for {n_feat} value columns")
        if len(self.stay_ids) != n_stays or len(self.time_grid) != n_stays:
            raise DatasetError("stay_ids/time_grid length must match the stay axis")
        if np.isinf(values).any():
            raise DatasetError("values must be finite where present (NaN marks absence)")
        grids = []
        for s, grid in enumerate(self.time_grid):
            grid = np.asarray(grid, dtype=np.int64)
            if grid.size > n_steps:
                raise DatasetError(f"stay {self.stay_ids[s]!r}: {grid.size} timestamps exceed tensor depth {n_steps}")
            if grid.size >= 2:
                step = np.diff(grid)
                if (step <= 0).any():
                    raise DatasetError(f"stay {self.stay_ids[s]!r}: non-monotone timestamps")
                if (step != 1).any():
                    raise DatasetError(f"stay {self.stay_ids[s]!r}: timestamps must be on a 1-hour grid")
            if np.isfinite(values[s, grid.size:, :]).any():
                raise DatasetError(f"stay {self.stay_ids[s]!r}: values present beyond the stay's time grid")
            grids.append(_readonly(grid))
        object.__setattr__(self, "time_grid", tuple(grids))
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "stay_ids", tuple(str(i) for i in self.stay_ids))
        object.__setattr__(self, "features", tuple(self.features))
        if self.outcome is not None:
            out = np.asarray(self.outcome)
            if out.shape != (n_stays,):
                raise DatasetError("outcome must be defined for every stay")
            if not np.isin(out, (0, 1)).all():
                raise DatasetError("outcome labels must be 0 or 1")
            object.__setattr__(self, "outcome", _readonly(out.astype(np.int8)))

    @property
    def n_stays(self) -> int:
        return self.values.shape[0]

    @property
    def n_timesteps(self) -> int:
        return self.values.shape[1]

    @property
    def n_features(self) -> int:
        return self.values.shape[2]

    @property
    def feature_names(self) -> tuple:
        return tuple(f.name for f in self.features)

    def observation_mask(self) -> np.ndarray:
        """Boolean tensor, True where a value is present."""
        return np.isfinite(self.values)

    def valid_rows(self) -> np.ndarray:
        """Boolean (stays, timesteps) map of rows inside each stay's grid."""
        valid = np.zeros(self.values.shape[:2], dtype=bool)
        for s, grid in enumerate(self.time_grid):
            valid[s, : grid.size] = True
        return valid

    def with_values(self, values: np.ndarray) -> "VitalsFrame":
        """Same metadata, new value tensor."""
        return VitalsFrame(self.stay_ids, self.time_grid, np.array(values, dtype=np.float64),
                           self.features, self.outcome)

    def subframe(self, stay_indices) -> "VitalsFrame":
        """Frame restricted to the given stays (tensor depth unchanged)."""
        idx = np.asarray(stay_indices, dtype=np.int64)
        outcome = None if self.outcome is None else self.outcome[idx]
        return VitalsFrame(tuple(self.stay_ids[i] for i in idx),
                           tuple(self.time_grid[i] for i in idx),
                           self.values[idx].copy(), self.features, outcome)


def frames_equal(a: VitalsFrame, b: VitalsFrame) -> bool:
    """Bit-level equality of values, absence pattern, grids, outcomes, and
    feature names (units are display metadata the CSV schema does not carry)."""
    if a.stay_ids != b.stay_ids or a.feature_names != b.feature_names:
        return False
    if len(a.time_grid) != len(b.time_grid) or any(
            not np.array_equal(g, h) for g, h in zip(a.time_grid, b.time_grid)):
        return False
    if (a.outcome is None) != (b.outcome is None):
        return False
    if a.outcome is not None and not np.array_equal(a.outcome, b.outcome):
        return False
    return np.array_equal(a.values, b.values, equal_nan=True)


# ---------------------------------------------------------------------------
# CSV I/O
#
# Schema: header `stay_id,time_hours,<feature...>[,outcome]`, UTF-8, comma
# separated, empty field = missing, `time_hours` integer. Any numeric column
# after time_hours is a feature unless named `outcome`.
# ---------------------------------------------------------------------------

def _format_value(v: float) -> str:
    # repr() is the shortest decimal that round-trips the double exactly
    return repr(float(v))


def load_csv(path) -> tuple:
    """Load a vitals CSV into ``(VitalsFrame, observation_mask)``.

    Raises
    ------
    DatasetError
        Malformed header, non-monotone or gapped timestamps, non-numeric
        value field, or duplicate (stay, hour) pair; messages carry the
        offending file line number.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if len(header) < 3 or header[0] != "stay_id" or header[1] != "time_hours":
            raise DatasetError(f"{path}: malformed header; expected 'stay_id,time_hours,<features...>[,outcome]'")
        has_outcome = "outcome" in header[2:]
        feature_cols = [(i, name) for i, name in enumerate(header) if i >= 2 and name != "outcome"]
        if not feature_cols:
            raise DatasetError(f"{path}: malformed header; no feature columns")
        outcome_col = header.index("outcome") if has_outcome else None

        order: list = []
        rows: dict = {}
        outcomes: dict = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DatasetError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            stay = row[0]
            try:
                hour = int(row[1])
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: time_hours must be an integer") from None
            if stay not in rows:
                rows[stay] = []
                order.append(stay)
            stay_rows = rows[stay]
            if stay_rows:
                last = stay_rows[-1][0]
                if hour == last:
                    raise DatasetError(f"{path}:{lineno}: duplicate (stay, hour) pair ({stay!r}, {hour})")
                if hour < last:
                    raise DatasetError(f"{path}:{lineno}: non-monotone timestamps within stay {stay!r}")
                if hour != last + 1:
                    raise DatasetError(f"{path}:{lineno}: timestamps must be on a 1-hour grid (gap after hour {last})")
            cells = np.full(len(feature_cols), np.nan)
            for j, (col, name) in enumerate(feature_cols):
                text = row[col]
                if text == "":
                    continue
                try:
                    cells[j] = float(text)
                except ValueError:
                    raise DatasetError(f"{path}:{lineno}: non-numeric value field {name!r}: {text!r}") from None
                if not math.isfinite(cells[j]):
                    raise DatasetError(f"{path}:{lineno}: non-finite value in field {name!r}")
            stay_rows.append((hour, cells))
            if outcome_col is not None:
                text = row[outcome_col]
                if text not in ("0", "1"):
                    raise DatasetError(f"{path}:{lineno}: outcome must be 0 or 1, got {text!r}")
                label = int(text)
                if outcomes.setdefault(stay, label) != label:
                    raise DatasetError(f"{path}:{lineno}: outcome not constant within stay {stay!r}")

    if not order:
        raise DatasetError(f"{path}: no data rows")
    n_steps = max(len(rows[s]) for s in order)
    values = np.full((len(order), n_steps, len(feature_cols)), np.nan)
    grids = []
    for s, stay in enumerate(order):
        hours = np.array([h for h, _ in rows[stay]], dtype=np.int64)
        grids.append(hours)
        for t, (_, cells) in enumerate(rows[stay]):
            values[s, t, :] = cells
    features = tuple(Feature(name) for _, name in feature_cols)
    outcome = np.array([outcomes[s] for s in order], dtype=np.int8) if has_outcome else None
    frame = VitalsFrame(tuple(order), tuple(grids), values, features, outcome)
    return frame, frame.observation_mask()


def write_csv(frame: VitalsFrame, mask: np.ndarray, path) -> None:
    """Write ``frame`` restricted to ``mask`` in the documented schema.

    ``load_csv(write_csv(frame, mask))`` reproduces frame and mask exactly:
    present floats are written as their shortest round-tripping decimal and
    absent cells as empty fields.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != frame.values.shape:
        raise DatasetError(f"mask shape {mask.shape} does not match values shape {frame.values.shape}")
    if (mask & ~np.isfinite(frame.values)).any():
        raise DatasetError("mask marks a cell present where the frame has no value")
    header = ["stay_id", "time_hours", *frame.feature_names]
    if frame.outcome is not None:
        header.append("outcome")
    try:
        fh = open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot write {path}: {exc}") from exc
    with fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for s, stay in enumerate(frame.stay_ids):
            for t, hour in enumerate(frame.time_grid[s]):
                row = [stay, str(int(hour))]
                row.extend(_format_value(frame.values[s, t, f]) if mask[s, t, f] else ""
                           for f in range(frame.n_features))
                if frame.outcome is not None:
                    row.append(str(int(frame.outcome[s])))
                writer.writerow(row)


def write_mask_csv(frame: VitalsFrame, mask: np.ndarray, path) -> None:
    """Write a 0/1 mask on the same grid as the data file (1 = removed)."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != frame.values.shape:
        raise DatasetError(f"mask shape {mask.shape} does not match values shape {frame.values.shape}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stay_id", "time_hours", *frame.feature_names])
        for s, stay in enumerate(frame.stay_ids):
            for t, hour in enumerate(frame.time_grid[s]):
                writer.writerow([stay, str(int(hour)), *(str(int(mask[s, t, f]))
                                                         for f in range(frame.n_features))])


def read_mask_csv(path, frame: VitalsFrame) -> np.ndarray:
    """Read a 0/1 mask file and align it to ``frame``'s grid."""
    mask_frame, present = load_csv(path)
    if mask_frame.stay_ids != frame.stay_ids or mask_frame.feature_names != frame.feature_names:
        raise DatasetError(f"{path}: mask file does not match the data file's stays/features")
    if any(not np.array_equal(g, h) for g, h in zip(mask_frame.time_grid, frame.time_grid)):
        raise DatasetError(f"{path}: mask file does not match the data file's time grid")
    valid = frame.valid_rows()[:, :, None] & np.ones(frame.n_features, dtype=bool)
    if not present[valid].all():
        raise DatasetError(f"{path}: mask file has empty cells")
    cells = mask_frame.values[: frame.n_stays, : frame.n_timesteps, :]
    if not np.isin(cells[valid], (0.0, 1.0)).all():
        raise DatasetError(f"{path}: mask values must be 0 or 1")
    mask = np.zeros(frame.values.shape, dtype=bool)
    mask[valid] = cells[valid] == 1.0
    return mask


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------

def _ar1(innovations: np.ndarray, coeff: float) -> np.ndarray:
    """Stationary unit-variance AR(1) driven by N(0,1) innovations (axis 1)."""
    out = np.empty_like(innovations)
    out[:, 0] = innovations[:, 0]
    scale = math.sqrt(1.0 - coeff * coeff)
    for t in range(1, innovations.shape[1]):
        out[:, t] = coeff * out[:, t - 1] + scale * innovations[:, t]
    return out


def generate_synthetic(n_stays: int, n_hours: int, seed: int,
                       native_missing_rates=None) -> tuple:
    """Generate a correlated 6-vital cohort for desk-scale verification.

    Each stay follows a shared latent AR(1) process (coefficient 0.9) plus
    per-feature AR(1) idiosyncrasies, so the vitals are cross-correlated and
    smooth in time. Mean arterial pressure is ``(sbp + 2*dbp)/3`` plus small
    noise, giving conditional imputers real structure to exploit. The outcome
    label is drawn from a logistic function of the stay's mean heart rate.
    Native missingness is applied per feature, independently at random, at
    ``native_missing_rates``. Deterministic in ``seed``.
    """
    if n_stays < 1:
        raise DatasetError("n_stays must be >= 1")
    if n_hours < 2:
        raise DatasetError("n_hours must be >= 2")
    n_feat = len(DEFAULT_FEATURES)
    rates = np.zeros(n_feat) if native_missing_rates is None else np.asarray(native_missing_rates, dtype=np.float64)
    if rates.shape != (n_feat,):
        raise DatasetError(f"native_missing_rates must have {n_feat} entries")
    if ((rates < 0) | (rates >= 1)).any():
        raise DatasetError("native missing rates must lie in [0, 1)")

    rng = derive_rng("synthetic", seed)
    shared = _ar1(rng.standard_normal((n_stays, n_hours)), 0.9)
    idio = {name: _ar1(rng.standard_normal((n_stays, n_hours)), 0.9)
            for name in ("hr", "resp", "o2sat", "sbp", "dbp")}
    stay_shift = rng.standard_normal(n_stays)[:, None]
    map_noise = rng.standard_normal((n_stays, n_hours))

    def mix(name: str, loading: float) -> np.ndarray:
        return loading * shared + math.sqrt(1.0 - loading * loading) * idio[name]

    hr = 80.0 + 6.0 * stay_shift + 13.0 * mix("hr", 0.7)
    resp = 18.0 + 4.5 * mix("resp", 0.6)
    o2sat = 96.5 - 2.0 * mix("o2sat", 0.5)
    sbp = 120.0 + 5.0 * stay_shift + 17.0 * mix("sbp", 0.7)
    dbp = 70.0 + 3.0 * stay_shift + 10.0 * mix("dbp", 0.6)
    for name, series in (("hr", hr), ("resp", resp), ("o2sat", o2sat), ("sbp", sbp), ("dbp", dbp)):
        lo, hi = _SYNTH_CLIP[name]
        np.clip(series, lo, hi, out=series)
    map_ = (sbp + 2.0 * dbp) / 3.0 + 0.8 * map_noise

    values = np.stack([hr, resp, o2sat, map_, sbp, dbp], axis=2)
    death_p = 1.0 / (1.0 + np.exp(-(hr.mean(axis=1) - 80.0) / 8.0))
    outcome = (rng.random(n_stays) < death_p).astype(np.int8)

    drop = rng.random((n_stays, n_hours, n_feat)) < rates[None, None, :]
    values[drop] = np.nan

    stay_ids = tuple(f"stay{s:05d}" for s in range(n_stays))
    grids = tuple(np.arange(n_hours, dtype=np.int64) for _ in range(n_stays))
    frame = VitalsFrame(stay_ids, grids, values, DEFAULT_FEATURES, outcome)
    return frame, frame.observation_mask()


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class NormalizationStats:
    """Per-feature mean and population standard deviation (floored at 1e-8),
    computed on observed cells of a designated stay split."""

    mean: np.ndarray
    std: np.ndarray
    feature_names: tuple

    def __post_init__(self):
        object.__setattr__(self, "mean", _readonly(np.asarray(self.mean, dtype=np.float64)))
        object.__setattr__(self, "std", _readonly(np.asarray(self.std, dtype=np.float64)))
        if (self.std <= 0).any():
            raise DatasetError("normalization std must be positive")

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std

    def invert_values(self, values: np.ndarray) -> np.ndarray:
        return values * self.std + self.mean

    def apply(self, frame: VitalsFrame) -> VitalsFrame:
        return frame.with_values(self.apply_values(frame.values))

    def invert(self, frame: VitalsFrame) -> VitalsFrame:
        return frame.with_values(self.invert_values(frame.values))


def fit_normalizer(frame: VitalsFrame, mask: np.ndarray, stays=None) -> NormalizationStats:
    """Fit per-feature stats on the observed cells of the given stays.

    Raises
    ------
    DatasetError
        If any feature has zero observed cells in the fitting split.
    """
    mask = np.asarray(mask, dtype=bool)
    idx = np.arange(frame.n_stays) if stays is None else np.asarray(stays, dtype=np.int64)
    sub_vals = frame.values[idx]
    sub_mask = mask[idx]
    mean = np.empty(frame.n_features)
    std = np.empty(frame.n_features)
    for f in range(frame.n_features):
        col = sub_vals[:, :, f][sub_mask[:, :, f]]
        if col.size == 0:
            raise DatasetError(f"feature {frame.feature_names[f]!r} has no observed cells in the fitting split")
        mean[f] = col.mean()
        std[f] = max(col.std(), STD_FLOOR)
    return NormalizationStats(mean, std, frame.feature_names)


# ---------------------------------------------------------------------------
# Stay-level splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitAssignment:
    """Disjoint stay-level train/val/test partition; a pure function of
    (seed, stay count, ratios)."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    ratios: tuple
    seed: int

    def __post_init__(self):
        for name in ("train", "val", "test"):
            object.__setattr__(self, name, _readonly(np.asarray(getattr(self, name), dtype=np.int64)))

    @property
    def n_stays(self) -> int:
        return self.train.size + self.val.size + self.test.size


def split_stays(frame: VitalsFrame, ratios, seed: int) -> SplitAssignment:
    """Seeded shuffle then contiguous slicing by ratio.

    Counts are floored and the remainder goes to train, so ``(0.8, 0.1, 0.1)``
    over 10 stays yields 8/1/1.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or ratios[0] <= 0:
        raise DatasetError("ratios must be three non-negative numbers with train > 0")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DatasetError(f"ratios must sum to 1, got {sum(ratios)}")
    n = frame.n_stays
    nonempty = sum(1 for r in ratios if r > 0)
    if n < nonempty:
        raise DatasetError(f"{n} stays cannot fill {nonempty} nonempty partitions")
    perm = derive_rng("split", seed).permutation(n)
    n_val = int(n * ratios[1])
    n_test = int(n * ratios[2])
    n_train = n - n_val - n_test
    return SplitAssignment(np.sort(perm[:n_train]),
                           np.sort(perm[n_train:n_train + n_val]),
                           np.sort(perm[n_train + n_val:]),
                           ratios, seed)
