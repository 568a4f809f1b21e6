"""Logistic-loss gradient boosting and split-gain feature importance."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.special import expit

from .tree import DecisionTree, grow_tree


class DegenerateFitError(ValueError):
    """Training labels contain a single class (or too few samples)."""


@dataclass(frozen=True)
class GbdtConfig:
    n_estimators: int = 100
    learning_rate: float = 0.01
    max_depth: int = 3
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")


def check_binary_training(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError(f"expected X of shape (n, d) matching y, got {X.shape} and {y.shape}")
    if len(y) < 2:
        raise DegenerateFitError("need at least 2 training samples")
    if not np.all(np.isfinite(X)):
        raise ValueError("training matrix must be dense (impute missing values first)")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    if len(np.unique(y)) < 2:
        raise DegenerateFitError("training labels contain a single class")
    return X, y.astype(float)


def log_loss_terms(y: np.ndarray, score: np.ndarray) -> np.ndarray:
    """Per-sample logistic loss for raw scores (log-odds)."""
    return np.logaddexp(0.0, score) - y * score


def mean_log_loss(y: np.ndarray, score: np.ndarray) -> float:
    return math.fsum(log_loss_terms(y, score)) / len(y)


@dataclass
class GbdtModel:
    init_score: float
    trees: list[DecisionTree]
    config: GbdtConfig
    n_features: int
    loss_history: list[float] = field(default_factory=list)

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        score = np.full(len(X), self.init_score)
        for tree in self.trees:
            score = score + tree.predict_value(X)
        return score

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.clip(expit(self.decision_function(X)), 1e-15, 1 - 1e-15)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    def to_dict(self) -> dict[str, Any]:
        return {
            "init_score": self.init_score,
            "trees": [t.to_dict() for t in self.trees],
            "config": asdict(self.config),
            "n_features": self.n_features,
            "loss_history": list(self.loss_history),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "GbdtModel":
        return cls(
            init_score=float(data["init_score"]),
            trees=[DecisionTree.from_dict(t) for t in data["trees"]],
            config=GbdtConfig(**data["config"]),
            n_features=int(data["n_features"]),
            loss_history=[float(v) for v in data.get("loss_history", [])],
        )


def _safeguarded_leaf_values(tree: DecisionTree, leaves: np.ndarray, y: np.ndarray,
                             score: np.ndarray, lr: float) -> np.ndarray:
    """Shrunken Newton leaf values, halved until the leaf's own loss does not rise."""
    values = np.zeros_like(tree.value)
    for leaf in np.unique(leaves):
        idx = leaves == leaf
        step = lr * tree.value[leaf]
        before = math.fsum(log_loss_terms(y[idx], score[idx]))
        for _ in range(60):
            if math.fsum(log_loss_terms(y[idx], score[idx] + step)) <= before:
                break
            step *= 0.5
        else:
            step = 0.0
        values[leaf] = step
    return values


def fit_gbdt(X: np.ndarray, y: np.ndarray, config: GbdtConfig = GbdtConfig()) -> GbdtModel:
    """Gradient boosting of depth-limited regression trees on logistic loss.

    Starts from the log-odds of the base rate. Each round fits a tree to
    the gradient/hessian of the current scores, sets each leaf to a shrunken
    Newton step and records the mean training log-loss, which is
    non-increasing by construction. Stops early when a round cannot change
    any score.
    """
    X, y = check_binary_training(X, y)
    base = y.mean()
    init = math.log(base / (1 - base))
    score = np.full(len(y), init)
    history = [mean_log_loss(y, score)]
    trees: list[DecisionTree] = []
    # trees use every feature and no sampling; the seed only pins the contract
    for _ in range(config.n_estimators):
        p = expit(score)
        g = p - y
        h = np.maximum(p * (1 - p), 1e-16)
        tree = grow_tree(X, g, h, config.max_depth)
        leaves = tree.apply(X)
        tree.value = _safeguarded_leaf_values(tree, leaves, y, score, config.learning_rate)
        new_score = score + tree.value[leaves]
        loss = mean_log_loss(y, new_score)
        shrink = 0
        while loss > history[-1] and shrink < 60:
            tree.value *= 0.5
            new_score = score + tree.value[leaves]
            loss = mean_log_loss(y, new_score)
            shrink += 1
        if loss > history[-1] or not np.any(tree.value):
            break
        trees.append(tree)
        score = new_score
        history.append(loss)
    if np.any(np.diff(history) > 0):
        raise RuntimeError("training log-loss increased during boosting")
    return GbdtModel(init_score=init, trees=trees, config=config, n_features=X.shape[1], loss_history=history)


@dataclass(frozen=True)
class ImportanceRanking:
    """Split-gain importance per feature, normalized to sum 1 when any split exists."""

    feature_names: tuple[str, ...]
    importance: tuple[float, ...]
    has_splits: bool

    @property
    def order(self) -> list[str]:
        """Feature names by decreasing importance; ties keep the input order."""
        idx = sorted(range(len(self.importance)), key=lambda i: (-self.importance[i], i))
        return [self.feature_names[i] for i in idx]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.feature_names, self.importance))

    def top_k(self, k: int) -> list[str]:
        """The ``k`` most important features with strictly positive importance."""
        scores = self.as_dict()
        return [n for n in self.order if scores[n] > 0][:k]


def feature_importance(model: GbdtModel, feature_names: Sequence[str] | None = None) -> ImportanceRanking:
    """Sum of split gains per feature over all trees, normalized to 1."""
    names = tuple(feature_names) if feature_names is not None else tuple(f"f{i}" for i in range(model.n_features))
    if len(names) != model.n_features:
        raise ValueError(f"{len(names)} names for a model with {model.n_features} features")
    total = np.zeros(model.n_features)
    for tree in model.trees:
        total += tree.importance()
    s = total.sum()
    if s <= 0:
        return ImportanceRanking(names, tuple(0.0 for _ in names), has_splits=False)
    return ImportanceRanking(names, tuple(float(v) for v in total / s), has_splits=True)
