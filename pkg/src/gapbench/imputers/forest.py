"""Random-forest regressor built from scratch on CART regression trees.

Trees grow greedily on variance-reduction splits (equivalently, minimum
summed child squared error). Each tree sees a bootstrap resample and each
split searches a random feature subsample. Predictions average the trees in
index order so the floating-point reduction order is fixed and results are
bit-reproducible for a given RNG stream.
"""

from __future__ import annotations

import math

import numpy as np


class RegressionTree:
    """CART regression tree with axis-aligned threshold splits."""

    def __init__(self, max_depth: int = 10, min_leaf: int = 3, n_split_features: int | None = None):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.n_split_features = n_split_features

    def fit(self, x: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> "RegressionTree":
        n, d = x.shape
        k = self.n_split_features or max(1, int(math.sqrt(d)))
        k = min(k, d)
        feature, thresh, left, right, value = [], [], [], [], []
        stack = [(np.arange(n), 0, -1, False)]
        while stack:
            idx, depth, parent, is_right = stack.pop()
            node = len(feature)
            if parent >= 0:
                if is_right:
                    right[parent] = node
                else:
                    left[parent] = node
            feature.append(-1)
            thresh.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(float(y[idx].mean()))
            if depth >= self.max_depth or idx.size < 2 * self.min_leaf:
                continue
            best = self._best_split(x, y, idx, rng.choice(d, size=k, replace=False))
            if best is None:
                continue
            f, t, left_idx, right_idx = best
            feature[node] = f
            thresh[node] = t
            stack.append((right_idx, depth + 1, node, True))
            stack.append((left_idx, depth + 1, node, False))
        self.feature_ = np.array(feature, dtype=np.int64)
        self.thresh_ = np.array(thresh)
        self.left_ = np.array(left, dtype=np.int64)
        self.right_ = np.array(right, dtype=np.int64)
        self.value_ = np.array(value)
        return self

    def _best_split(self, x, y, idx, candidates):
        y_node = y[idx]
        best_sse = np.inf
        best = None
        for f in candidates:
            xv = x[idx, f]
            order = np.argsort(xv, kind="stable")
            xs = xv[order]
            ys = y_node[order]
            n = idx.size
            pos = np.arange(self.min_leaf - 1, n - self.min_leaf)
            splittable = xs[pos] < xs[pos + 1]
            if not splittable.any():
                continue
            pos = pos[splittable]
            cum_y = np.cumsum(ys)
            cum_y2 = np.cumsum(ys * ys)
            n_left = pos + 1.0
            n_right = n - n_left
            sse_left = cum_y2[pos] - cum_y[pos] ** 2 / n_left
            sse_right = (cum_y2[-1] - cum_y2[pos]) - (cum_y[-1] - cum_y[pos]) ** 2 / n_right
            sse = sse_left + sse_right
            j = int(np.argmin(sse))
            if sse[j] < best_sse:
                best_sse = sse[j]
                cut = 0.5 * (xs[pos[j]] + xs[pos[j] + 1])
                go_left = xv <= cut
                best = (int(f), float(cut), idx[go_left], idx[~go_left])
        return best

    def predict(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(x.shape[0])
        stack = [(0, np.arange(x.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if idx.size == 0:
                continue
            if self.feature_[node] < 0:
                out[idx] = self.value_[node]
                continue
            go_left = x[idx, self.feature_[node]] <= self.thresh_[node]
            stack.append((self.left_[node], idx[go_left]))
            stack.append((self.right_[node], idx[~go_left]))
        return out


class RandomForestRegressor:
    """Bagged CART trees; per-tree RNG streams come from the caller."""

    def __init__(self, n_trees: int = 50, max_depth: int = 10, min_leaf: int = 3,
                 n_split_features: int | None = None):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.n_split_features = n_split_features

    def fit(self, x: np.ndarray, y: np.ndarray, tree_rngs) -> "RandomForestRegressor":
        """``tree_rngs`` yields one generator per tree (bootstrap + splits)."""
        self.trees_ = []
        for j in range(self.n_trees):
            rng = tree_rngs(j)
            sample = rng.integers(0, x.shape[0], size=x.shape[0])
            tree = RegressionTree(self.max_depth, self.min_leaf, self.n_split_features)
            self.trees_.append(tree.fit(x[sample], y[sample], rng))
        return self

    def predict(self, x: np.ndarray) -> np.ndarray:
        total = np.zeros(x.shape[0])
        for tree in self.trees_:
            total += tree.predict(x)
        return total / len(self.trees_)
