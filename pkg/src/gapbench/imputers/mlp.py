"""Per-timestep reconstruction network trained with in-house backprop.

Each (stay, timestep) row becomes one sample: the input is the zero-filled
feature vector concatenated with its visibility mask (length 2F), and the
network reconstructs all F features through two ReLU hidden layers. The loss
is the mean squared error over the row's originally visible cells; on every
batch a random fraction of visible cells is additionally hidden from the
input (entries zeroed, mask bits cleared) while staying reconstruction
targets, which trains the network to fill genuinely missing inputs.
Optimization is adaptive moment estimation with early stopping on the MAE of
a fixed hidden-cell validation set.
"""

from __future__ import annotations

import numpy as np

from ..rng import derive_rng
from .base import ImputationError, Imputer


def _relu(x):
    return np.maximum(x, 0.0)


class MlpNet:
    """Two-hidden-layer ReLU regressor with hand-written gradients."""

    def __init__(self, n_features: int, hidden_width: int, seed: int):
        rng = derive_rng("mlp", "init", seed)
        n_in = 2 * n_features
        self.weights = {
            "W1": rng.standard_normal((n_in, hidden_width)) * np.sqrt(2.0 / n_in),
            "b1": np.zeros(hidden_width),
            "W2": rng.standard_normal((hidden_width, hidden_width)) * np.sqrt(2.0 / hidden_width),
            "b2": np.zeros(hidden_width),
            "W3": rng.standard_normal((hidden_width, n_features)) * np.sqrt(2.0 / hidden_width),
            "b3": np.zeros(n_features),
        }

    def forward(self, inputs: np.ndarray) -> np.ndarray:
        w = self.weights
        h1 = _relu(inputs @ w["W1"] + w["b1"])
        h2 = _relu(h1 @ w["W2"] + w["b2"])
        return h2 @ w["W3"] + w["b3"]

    def loss_and_grads(self, inputs: np.ndarray, targets: np.ndarray, target_mask: np.ndarray):
        """MSE over the masked target cells and its analytic gradients."""
        w = self.weights
        z1 = inputs @ w["W1"] + w["b1"]
        h1 = _relu(z1)
        z2 = h1 @ w["W2"] + w["b2"]
        h2 = _relu(z2)
        out = h2 @ w["W3"] + w["b3"]

        mask = target_mask.astype(np.float64)
        n_targets = mask.sum()
        if n_targets == 0:
            raise ImputationError("batch has no target cells")
        resid = (out - targets) * mask
        loss = float(np.sum(resid * resid) / n_targets)

        d_out = 2.0 * resid / n_targets
        grads = {"W3": h2.T @ d_out, "b3": d_out.sum(axis=0)}
        d_h2 = (d_out @ w["W3"].T) * (z2 > 0)
        grads["W2"] = h1.T @ d_h2
        grads["b2"] = d_h2.sum(axis=0)
        d_h1 = (d_h2 @ w["W2"].T) * (z1 > 0)
        grads["W1"] = inputs.T @ d_h1
        grads["b1"] = d_h1.sum(axis=0)
        return loss, grads


class AdamState:
    """Adaptive moment estimation with bias correction."""

    def __init__(self, weights: dict, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in weights.items()}
        self.v = {k: np.zeros_like(v) for k, v in weights.items()}
        self.t = 0

    def step(self, weights: dict, grads: dict) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for k in weights:
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * grads[k]
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * grads[k] ** 2
            weights[k] -= self.lr * (self.m[k] / b1c) / (np.sqrt(self.v[k] / b2c) + self.eps)


class MlpImputer(Imputer):
    name = "mlp"
    PARAMS = {
        "hidden_width": 64,
        "epochs": 100,
        "batch_size": 256,
        "learning_rate": 1e-3,
        "hideout": 0.1,
        "patience": 10,
        "val_fraction": 0.1,
    }

    @classmethod
    def validate_params(cls, params):
        merged = super().validate_params(params)
        if merged["hidden_width"] < 1:
            raise ImputationError("mlp: hidden_width must be >= 1")
        if merged["epochs"] < 1 or merged["batch_size"] < 1 or merged["patience"] < 1:
            raise ImputationError("mlp: epochs, batch_size, and patience must be >= 1")
        if not 0.0 <= merged["hideout"] < 1.0 or not 0.0 <= merged["val_fraction"] < 1.0:
            raise ImputationError("mlp: hideout and val_fraction must lie in [0, 1)")
        if merged["learning_rate"] <= 0:
            raise ImputationError("mlp: learning_rate must be positive")
        return merged

    @staticmethod
    def _rows(frame, visible):
        n_feat = frame.n_features
        vis = visible.reshape(-1, n_feat)
        vals = np.where(vis, frame.values.reshape(-1, n_feat), 0.0)
        return vals, vis

    def _val_mae(self, net) -> float:
        inputs = np.concatenate([np.where(self._val_input_vis, self._val_vals, 0.0),
                                 self._val_input_vis.astype(np.float64)], axis=1)
        pred = net.forward(inputs)
        err = np.abs(pred - self._val_vals)[self._val_targets]
        return float(err.mean())

    def fit(self, frame, visible):
        p = self.params
        vals, vis = self._rows(frame, visible)
        keep = vis.any(axis=1)
        vals, vis = vals[keep], vis[keep]
        n_rows = vals.shape[0]
        if n_rows == 0:
            raise ImputationError("mlp: no rows with visible cells")

        perm = derive_rng("mlp", "val", self.seed).permutation(n_rows)
        n_val = int(n_rows * p["val_fraction"])
        val_rows, train_rows = perm[:n_val], perm[n_val:]
        if train_rows.size == 0:
            raise ImputationError("mlp: validation split leaves no training rows")

        use_val = False
        if n_val > 0:
            self._val_vals = vals[val_rows]
            val_vis = vis[val_rows]
            hide = val_vis & (derive_rng("mlp", "valhide", self.seed).random(val_vis.shape) < p["hideout"])
            if hide.any():
                self._val_targets = hide
                self._val_input_vis = val_vis & ~hide
            else:
                self._val_targets = val_vis
                self._val_input_vis = val_vis
            use_val = True

        net = MlpNet(frame.n_features, p["hidden_width"], self.seed)
        adam = AdamState(net.weights, p["learning_rate"])
        best_mae = np.inf
        best_weights = None
        since_best = 0
        train_vals, train_vis = vals[train_rows], vis[train_rows]

        for epoch in range(p["epochs"]):
            order = derive_rng("mlp", "shuffle", self.seed, epoch).permutation(train_rows.size)
            for b_idx, start in enumerate(range(0, order.size, p["batch_size"])):
                batch = order[start:start + p["batch_size"]]
                b_vals, b_vis = train_vals[batch], train_vis[batch]
                if p["hideout"] > 0:
                    u = derive_rng("mlp", "hide", self.seed, epoch, b_idx).random(b_vis.shape)
                    input_vis = b_vis & ~(b_vis & (u < p["hideout"]))
                else:
                    input_vis = b_vis
                inputs = np.concatenate([np.where(input_vis, b_vals, 0.0),
                                         input_vis.astype(np.float64)], axis=1)
                if not b_vis.any():
                    continue
                loss, grads = net.loss_and_grads(inputs, b_vals, b_vis)
                if not np.isfinite(loss):
                    raise ImputationError(f"mlp: training diverged (non-finite loss) at epoch {epoch}")
                adam.step(net.weights, grads)
            if use_val:
                mae = self._val_mae(net)
                if mae < best_mae:
                    best_mae = mae
                    best_weights = {k: v.copy() for k, v in net.weights.items()}
                    since_best = 0
                else:
                    since_best += 1
                    if since_best >= p["patience"]:
                        break
        if best_weights is not None:
            net.weights = best_weights
        self.net_ = net

    def predict(self, frame, visible):
        vals, vis = self._rows(frame, visible)
        inputs = np.concatenate([vals, vis.astype(np.float64)], axis=1)
        return self.net_.forward(inputs).reshape(frame.values.shape)
