"""Constant-fill baselines and last-observation-carried-forward."""

from __future__ import annotations

import numpy as np

from ..dataset import VitalsFrame
from .base import Imputer


def _feature_stat(frame, visible, reducer) -> np.ndarray:
    values = frame.values
    out = np.empty(frame.n_features)
    for f in range(frame.n_features):
        out[f] = reducer(values[:, :, f][visible[:, :, f]])
    return out


def _mode_smallest(col: np.ndarray) -> float:
    # most frequent exact value; ties break toward the smallest value
    uniq, counts = np.unique(col, return_counts=True)
    return float(uniq[np.argmax(counts)])


class ZeroImputer(Imputer):
    name = "zero"
    REQUIRES_VISIBLE_PER_FEATURE = False

    def fit(self, frame, visible):
        pass

    def predict(self, frame, visible):
        return np.zeros_like(frame.values)


class _ConstantFillImputer(Imputer):
    reducer = None

    def fit(self, frame, visible):
        self.fill_ = _feature_stat(frame, visible, type(self).reducer)

    def predict(self, frame, visible):
        return np.broadcast_to(self.fill_, frame.values.shape).copy()


class MeanImputer(_ConstantFillImputer):
    name = "mean"
    reducer = staticmethod(np.mean)


class MedianImputer(_ConstantFillImputer):
    name = "median"
    reducer = staticmethod(np.median)


class MostFrequentImputer(_ConstantFillImputer):
    name = "most_frequent"
    reducer = staticmethod(_mode_smallest)


class LocfImputer(Imputer):
    """Carry the last visible value forward within each stay and feature;
    leading gaps fall back to the feature's training mean."""

    name = "locf"

    def fit(self, frame, visible):
        self.fill_ = _feature_stat(frame, visible, np.mean)

    def predict(self, frame, visible):
        n_stays, n_steps, n_feat = frame.values.shape
        steps = np.arange(n_steps)[None, :, None]
        last_seen = np.where(visible, steps, -1)
        np.maximum.accumulate(last_seen, axis=1, out=last_seen)
        gathered = np.take_along_axis(frame.values, np.maximum(last_seen, 0), axis=1)
        fallback = np.broadcast_to(self.fill_, frame.values.shape)
        return np.where(last_seen >= 0, gathered, fallback)
