"""Chained-equation imputation with random-forest regressors per feature.

Same iteration skeleton as MICE, but each feature is modeled by an in-house
random forest (bootstrap, variance-reduction CART splits, per-split feature
subsample of floor(sqrt(F-1))). Fitting stops at the first iteration where
the summed squared change of the imputed cells increases, discarding that
iteration, or after ``max_iter`` rounds. The accepted rounds' forests are
recorded and replayed round by round when imputing a new frame, mirroring
the training trajectory. Per-tree RNG streams hash (seed, iteration,
feature, tree index), so forests are bit-identical across runs regardless
of execution order.
"""

from __future__ import annotations

import math

import numpy as np

from ..rng import derive_rng
from .base import ImputationError, Imputer
from .forest import RandomForestRegressor
from .mice import missingness_order


class MissForestImputer(Imputer):
    name = "missforest"
    PARAMS = {"n_trees": 50, "max_depth": 10, "min_leaf": 3, "max_iter": 5}

    @classmethod
    def validate_params(cls, params):
        merged = super().validate_params(params)
        for key in ("n_trees", "max_depth", "min_leaf", "max_iter"):
            if merged[key] < 1:
                raise ImputationError(f"missforest: {key} must be >= 1")
        return merged

    def _forest(self, n_predictors: int) -> RandomForestRegressor:
        return RandomForestRegressor(
            n_trees=self.params["n_trees"], max_depth=self.params["max_depth"],
            min_leaf=self.params["min_leaf"],
            n_split_features=max(1, int(math.sqrt(n_predictors))))

    def fit(self, frame, visible):
        n_feat = frame.n_features
        vis = visible.reshape(-1, n_feat)
        x = frame.values.reshape(-1, n_feat).copy()
        self.means_ = np.array([x[vis[:, f], f].mean() for f in range(n_feat)])
        x[~vis] = np.broadcast_to(self.means_, x.shape)[~vis]
        self.order_ = missingness_order(vis)
        others = {f: [g for g in range(n_feat) if g != f] for f in range(n_feat)}

        self.rounds_ = []
        prev_delta = np.inf
        for iteration in range(self.params["max_iter"]):
            forests = {}
            x_new = x.copy()
            delta = 0.0
            for f in self.order_:
                rows = vis[:, f]
                forest = self._forest(len(others[f]))
                forest.fit(x_new[rows][:, others[f]], x_new[rows, f],
                           lambda j, it=iteration, f=int(f): derive_rng(
                               "missforest", self.seed, it, f, j))
                forests[int(f)] = forest
                hidden = ~rows
                if hidden.any():
                    pred = forest.predict(x_new[hidden][:, others[f]])
                    delta += float(np.sum((pred - x_new[hidden, f]) ** 2))
                    x_new[hidden, f] = pred
            if delta > prev_delta:
                break
            self.rounds_.append(forests)
            x = x_new
            prev_delta = delta
            if delta == 0.0:
                break

    @property
    def forests_(self) -> dict:
        """Final accepted round's per-feature forests."""
        return self.rounds_[-1]

    def predict(self, frame, visible):
        n_feat = frame.n_features
        vis = visible.reshape(-1, n_feat)
        x = frame.values.reshape(-1, n_feat).copy()
        x[~vis] = np.broadcast_to(self.means_, x.shape)[~vis]
        others = {f: [g for g in range(n_feat) if g != f] for f in range(n_feat)}
        for forests in self.rounds_:
            for f in self.order_:
                hidden = ~vis[:, f]
                if not hidden.any():
                    continue
                x[hidden, f] = forests[int(f)].predict(x[hidden][:, others[f]])
        return x.reshape(frame.values.shape)
