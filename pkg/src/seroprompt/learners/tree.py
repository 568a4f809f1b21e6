"""Second-order regression trees shared by every tree-based learner.

A node's statistics are the sums ``G`` (gradients) and ``H`` (hessians) of
its samples. Splitting a node into L/R reduces the second-order loss
approximation by

    gain = 0.5 * (G_L**2 / H_L + G_R**2 / H_R - G**2 / H)

and a leaf takes the Newton value ``-G / H``. Classification trees reuse
the same machinery with ``g = -w * y`` and ``h = w``, which makes the gain
the weighted Gini decrease (up to a constant) and the leaf value the
weighted fraction of positives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    gain: float


def _midpoint(a: float, b: float) -> float:
    mid = a + (b - a) / 2.0
    # adjacent floats: keep b on the right side of ``x <= threshold``
    return a if mid >= b else mid


def exact_gain(x: np.ndarray, g: np.ndarray, h: np.ndarray, threshold: float) -> float:
    """Gain of the split ``x <= threshold`` with correctly rounded sums."""
    left = x <= threshold
    gl, hl = math.fsum(g[left]), math.fsum(h[left])
    gr, hr = math.fsum(g[~left]), math.fsum(h[~left])
    gt, ht = math.fsum(g), math.fsum(h)
    return 0.5 * (gl * gl / hl + gr * gr / hr - gt * gt / ht)


def best_split(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    features: np.ndarray | None = None,
) -> Split | None:
    """Exhaustive best split over ``features`` (all columns by default).

    Candidate thresholds are midpoints between consecutive distinct sorted
    values. Cumulative sums locate the best candidates; any candidate within
    rounding distance of the best is re-scored with exact sums, and exact
    ties go to the lower feature index, then the lower threshold.
    Returns None when no column has two distinct values.
    """
    n, d = X.shape
    if features is None:
        features = np.arange(d)
    gt, ht = g.sum(), h.sum()
    scale = float(np.sum(g * g / np.maximum(h, 1e-300))) + 1e-300
    parent = gt * gt / ht
    candidates: list[tuple[float, int, float]] = []
    best = -np.inf
    for f in sorted(int(i) for i in features):
        x = X[:, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        distinct = xs[:-1] < xs[1:]
        if not distinct.any():
            continue
        gl = np.cumsum(g[order])[:-1][distinct]
        hl = np.cumsum(h[order])[:-1][distinct]
        gr, hr = gt - gl, ht - hl
        with np.errstate(divide="ignore", invalid="ignore"):
            gains = 0.5 * (gl * gl / hl + gr * gr / hr - parent)
        gains = np.where((hl > 0) & (hr > 0), gains, -np.inf)
        lo, hi = xs[:-1][distinct], xs[1:][distinct]
        top = gains.max()
        if not np.isfinite(top):
            continue
        best = max(best, top)
        tol = 1e-9 * scale
        for i in np.flatnonzero(gains >= top - tol):
            candidates.append((float(gains[i]), f, _midpoint(float(lo[i]), float(hi[i]))))
    if not candidates:
        return None
    tol = 1e-9 * scale
    finalists = [(f, t) for gain, f, t in candidates if gain >= best - tol]
    chosen = None
    for f, t in finalists:
        gain = exact_gain(X[:, f], g, h, t)
        if chosen is None or gain > chosen.gain:
            chosen = Split(f, t, gain)
    return chosen


@dataclass
class DecisionTree:
    """Array-encoded binary tree; ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    n_features: int
    max_depth: int | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_splits(self) -> int:
        return int(np.sum(self.feature >= 0))

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[self.right[i]] = depths[i] + 1
        return int(depths.max()) if self.n_nodes else 0

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row of ``X``."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            f = self.feature[node]
            internal = f >= 0
            if not internal.any():
                return node
            fi = np.where(internal, f, 0)
            go_left = X[rows, fi] <= self.threshold[node]
            nxt = np.where(go_left, self.left[node], self.right[node])
            node = np.where(internal, nxt, node)

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def importance(self) -> np.ndarray:
        out = np.zeros(self.n_features)
        internal = self.feature >= 0
        np.add.at(out, self.feature[internal], np.maximum(self.gain[internal], 0.0))
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "gain": self.gain.tolist(),
            "n_features": self.n_features,
            "max_depth": self.max_depth,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DecisionTree":
        return cls(
            feature=np.asarray(data["feature"], dtype=np.int64),
            threshold=np.asarray(data["threshold"], dtype=float),
            left=np.asarray(data["left"], dtype=np.int64),
            right=np.asarray(data["right"], dtype=np.int64),
            value=np.asarray(data["value"], dtype=float),
            gain=np.asarray(data["gain"], dtype=float),
            n_features=int(data["n_features"]),
            max_depth=data.get("max_depth"),
        )


def grow_tree(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    max_depth: int | None,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
) -> DecisionTree:
    """Grow a tree greedily, depth-first.

    A node is split while depth allows, its samples do not already share
    one Newton value, and a valid split with non-negative gain exists.
    Zero-gain splits are allowed, as they can unlock gains deeper down
    (XOR). With ``max_features`` set, each node draws that many candidate
    columns from ``rng`` without replacement.
    """
    X = np.asarray(X, dtype=float)
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    n, d = X.shape
    if max_features is not None and rng is None:
        raise ValueError("max_features requires an rng")
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    gain: list[float] = []

    def new_node(idx: np.ndarray) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(-math.fsum(g[idx]) / math.fsum(h[idx]))
        gain.append(0.0)
        return len(feature) - 1

    stack = [(new_node(np.arange(n)), np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if (max_depth is not None and depth >= max_depth) or len(idx) < 2:
            continue
        ratio = g[idx] / h[idx]
        if np.ptp(ratio) == 0:
            continue
        feats = None
        if max_features is not None and max_features < d:
            feats = np.sort(rng.choice(d, size=max_features, replace=False))
        split = best_split(X[idx], g[idx], h[idx], feats)
        if split is None or split.gain < -1e-12 * abs(float(np.sum(g[idx] * ratio))):
            continue
        go_left = X[idx, split.feature] <= split.threshold
        li, ri = idx[go_left], idx[~go_left]
        feature[node] = split.feature
        threshold[node] = split.threshold
        gain[node] = split.gain
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # right pushed first so the left subtree is expanded first
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=float),
        gain=np.asarray(gain, dtype=float),
        n_features=d,
        max_depth=max_depth,
    )


def classification_stats(y: np.ndarray, weights: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Gradient/hessian pair turning ``grow_tree`` into a (weighted) Gini tree."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    return -w * y, w.copy()


def fit_decision_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int | None = None,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
    weights: np.ndarray | None = None,
) -> DecisionTree:
    """Classification tree whose leaves hold the fraction of class 1."""
    g, h = classification_stats(y, weights)
    return grow_tree(X, g, h, max_depth, max_features, rng)
