"""Single-imputation chained equations with per-feature ridge regressions.

Fitting runs the chained-equation loop on the training data: non-visible
cells start at the feature means, then each feature in ascending
missingness order is regressed on all others (ridge, unpenalized intercept)
over the rows where it is visible, and its non-visible cells are replaced by
predictions. The loop stops once the largest absolute change of any imputed
cell drops below ``tol`` or after ``max_iter`` rounds.

Every round's regressions are recorded, and imputing a new frame replays
them round by round from the same mean initialization, so each model sees
data in the joint state it was fitted on. Predictions clip to the visible
training range: imputed predictor columns become collinear as the chain
converges, and the weakly regularized ridge can then carry large paired
coefficients that misbehave off the training trajectory.
"""

from __future__ import annotations

import numpy as np

from .base import ImputationError, Imputer


def ridge_fit(design: np.ndarray, target: np.ndarray, lam: float):
    """Ridge with centered design and unpenalized intercept; returns (w, b)."""
    if design.shape[1] == 0:
        return np.zeros(0), float(target.mean())
    mu = design.mean(axis=0)
    centered = design - mu
    y_mean = target.mean()
    gram = centered.T @ centered + lam * np.eye(design.shape[1])
    w = np.linalg.solve(gram, centered.T @ (target - y_mean))
    return w, float(y_mean - mu @ w)


def missingness_order(visible_rows: np.ndarray) -> np.ndarray:
    """Feature indices sorted by ascending non-visible fraction (stable)."""
    missing_frac = 1.0 - visible_rows.mean(axis=0)
    return np.argsort(missing_frac, kind="stable")


class MiceImputer(Imputer):
    name = "mice"
    PARAMS = {"max_iter": 10, "tol": 1e-3, "ridge_lambda": 1e-3}

    @classmethod
    def validate_params(cls, params):
        merged = super().validate_params(params)
        if merged["max_iter"] < 1:
            raise ImputationError("mice: max_iter must be >= 1")
        if merged["ridge_lambda"] < 0:
            raise ImputationError("mice: ridge_lambda must be >= 0")
        return merged

    def fit(self, frame, visible):
        n_feat = frame.n_features
        vis = visible.reshape(-1, n_feat)
        x = frame.values.reshape(-1, n_feat).copy()
        self.means_ = np.array([x[vis[:, f], f].mean() for f in range(n_feat)])
        self.lo_ = np.array([x[vis[:, f], f].min() for f in range(n_feat)])
        self.hi_ = np.array([x[vis[:, f], f].max() for f in range(n_feat)])
        x[~vis] = np.broadcast_to(self.means_, x.shape)[~vis]
        self.order_ = missingness_order(vis)
        self.rounds_ = []
        others = {f: [g for g in range(n_feat) if g != f] for f in range(n_feat)}
        for _ in range(self.params["max_iter"]):
            round_models = {}
            max_change = 0.0
            for f in self.order_:
                rows = vis[:, f]
                w, b = ridge_fit(x[rows][:, others[f]], x[rows, f], self.params["ridge_lambda"])
                round_models[int(f)] = (w, b)
                hidden = ~rows
                if hidden.any():
                    pred = np.clip(x[hidden][:, others[f]] @ w + b, self.lo_[f], self.hi_[f])
                    max_change = max(max_change, float(np.max(np.abs(pred - x[hidden, f]))))
                    x[hidden, f] = pred
            self.rounds_.append(round_models)
            if max_change < self.params["tol"]:
                break

    @property
    def models_(self) -> dict:
        """Final round's per-feature regressions."""
        return self.rounds_[-1]

    def predict(self, frame, visible):
        n_feat = frame.n_features
        vis = visible.reshape(-1, n_feat)
        x = frame.values.reshape(-1, n_feat).copy()
        x[~vis] = np.broadcast_to(self.means_, x.shape)[~vis]
        others = {f: [g for g in range(n_feat) if g != f] for f in range(n_feat)}
        for round_models in self.rounds_:
            for f in self.order_:
                hidden = ~vis[:, f]
                if not hidden.any():
                    continue
                w, b = round_models[int(f)]
                x[hidden, f] = np.clip(x[hidden][:, others[f]] @ w + b, self.lo_[f], self.hi_[f])
        return x.reshape(frame.values.shape)
