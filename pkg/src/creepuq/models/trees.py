"""Least-squares regression trees used as boosting base learners."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class RegressionTree:
    """Binary tree in flat arrays. ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    max_depth: int

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        node = np.zeros(X.shape[0], dtype=int)
        for _ in range(self.max_depth):
            f = self.feature[node]
            internal = f >= 0
            if not internal.any():
                break
            rows = np.flatnonzero(internal)
            go_left = X[rows, f[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(np.asarray(X, dtype=np.float64))]

    def depth(self) -> int:
        def walk(i):
            return 0 if self.feature[i] < 0 else 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)


def _best_split(X: np.ndarray, r: np.ndarray, min_leaf: int):
    """Best (gain, feature, threshold) by squared-error reduction."""
    n, d = X.shape
    total = r.sum()
    base = total * total / n
    best = (0.0, -1, 0.0)
    for j in range(d):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        cs = np.cumsum(r[order])
        counts = np.arange(1, n)
        left_sum = cs[:-1]
        right_sum = total - left_sum
        gain = left_sum ** 2 / counts + right_sum ** 2 / (n - counts) - base
        valid = (xs[1:] > xs[:-1]) & (counts >= min_leaf) & (n - counts >= min_leaf)
        if not valid.any():
            continue
        gain = np.where(valid, gain, -np.inf)
        k = int(np.argmax(gain))
        if gain[k] > best[0] + 1e-12:
            best = (float(gain[k]), j, 0.5 * (xs[k] + xs[k + 1]))
    return best


def fit_tree(X, r, max_depth: int = 3, min_samples_leaf: int = 1,
             leaf_value: Callable[[np.ndarray], float] | None = None) -> RegressionTree:
    """Grow a tree on pseudo-responses ``r``.

    Splits minimize squared error on ``r``. Leaf outputs are the mean of
    ``r`` unless ``leaf_value`` maps the row indices of a leaf to a value
    (used for quantile leaves in gradient boosting).
    """
    X = np.asarray(X, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    def grow(idx: np.ndarray, depth: int) -> int:
        node = new_node()
        split = (0.0, -1, 0.0)
        if depth < max_depth and idx.size >= 2 * min_samples_leaf:
            split = _best_split(X[idx], r[idx], min_samples_leaf)
        if split[1] < 0:
            value[node] = float(leaf_value(idx)) if leaf_value else float(r[idx].mean())
            return node
        _, j, t = split
        mask = X[idx, j] <= t
        feature[node], threshold[node] = j, t
        left[node] = grow(idx[mask], depth + 1)
        right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(X.shape[0]), 0)
    return RegressionTree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                          np.array(value), max_depth)
