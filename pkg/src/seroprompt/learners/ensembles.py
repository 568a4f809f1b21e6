"""Discrete AdaBoost over stumps and a bootstrap random forest."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any, Mapping

import numpy as np
from scipy.special import expit

from .gbdt import check_binary_training
from .tree import DecisionTree, fit_decision_tree


@dataclass(frozen=True)
class AdaBoostConfig:
    n_estimators: int = 100
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")


@dataclass
class AdaBoostModel:
    stumps: list[DecisionTree]
    alphas: list[float]
    config: AdaBoostConfig
    n_features: int

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        score = np.zeros(len(X))
        for stump, alpha in zip(self.stumps, self.alphas):
            vote = np.where(stump.predict_value(X) >= 0.5, 1.0, -1.0)
            score += alpha * vote
        return score

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        # additive logistic reading of the boosted score
        return expit(2.0 * self.decision_function(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    def to_dict(self) -> dict[str, Any]:
        return {
            "stumps": [s.to_dict() for s in self.stumps],
            "alphas": list(self.alphas),
            "config": asdict(self.config),
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AdaBoostModel":
        return cls(
            stumps=[DecisionTree.from_dict(s) for s in data["stumps"]],
            alphas=[float(a) for a in data["alphas"]],
            config=AdaBoostConfig(**data["config"]),
            n_features=int(data["n_features"]),
        )


def fit_adaboost(X: np.ndarray, y: np.ndarray, config: AdaBoostConfig = AdaBoostConfig()) -> AdaBoostModel:
    """Discrete AdaBoost with weighted-Gini stumps.

    Stage weight is ``0.5 * ln((1 - err) / err)``. Boosting halts when a
    stump's weighted error reaches 0.5 (that stump is discarded) or 0 (that
    stump is kept with its error floored at 1e-10).
    """
    X, y = check_binary_training(X, y)
    n = len(y)
    w = np.full(n, 1.0 / n)
    sign = np.where(y > 0, 1.0, -1.0)
    stumps: list[DecisionTree] = []
    alphas: list[float] = []
    for _ in range(config.n_estimators):
        stump = fit_decision_tree(X, y, max_depth=1, weights=w)
        pred = np.where(stump.predict_value(X) >= 0.5, 1.0, -1.0)
        wrong = pred != sign
        err = math.fsum(w[wrong]) / math.fsum(w)
        if err >= 0.5:
            break
        perfect = err <= 0.0
        err = max(err, 1e-10)
        alpha = 0.5 * math.log((1 - err) / err)
        stumps.append(stump)
        alphas.append(alpha)
        if perfect:
            break
        w = w * np.exp(-alpha * sign * pred)
        w /= w.sum()
    return AdaBoostModel(stumps=stumps, alphas=alphas, config=config, n_features=X.shape[1])


@dataclass(frozen=True)
class RandomForestConfig:
    n_estimators: int = 100
    max_depth: int | None = None
    max_features: int | str | None = "sqrt"
    bootstrap: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")

    def features_per_split(self, d: int) -> int:
        if self.max_features is None:
            return d
        if self.max_features == "sqrt":
            return max(1, int(math.sqrt(d)))
        return max(1, min(d, int(self.max_features)))


@dataclass
class RandomForestModel:
    trees: list[DecisionTree]
    config: RandomForestConfig
    n_features: int

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Fraction of trees voting for class 1."""
        X = np.asarray(X, dtype=float)
        votes = np.zeros(len(X))
        for tree in self.trees:
            votes += tree.predict_value(X) >= 0.5
        return votes / len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    def to_dict(self) -> dict[str, Any]:
        return {"trees": [t.to_dict() for t in self.trees], "config": asdict(self.config), "n_features": self.n_features}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RandomForestModel":
        return cls(
            trees=[DecisionTree.from_dict(t) for t in data["trees"]],
            config=RandomForestConfig(**data["config"]),
            n_features=int(data["n_features"]),
        )


def fit_random_forest(X: np.ndarray, y: np.ndarray, config: RandomForestConfig = RandomForestConfig()) -> RandomForestModel:
    """Bagged Gini trees with a random feature subset drawn at every split.

    Tree ``i`` uses its own child of ``SeedSequence(rng_seed)``, so each tree
    depends only on the seed and its index.
    """
    X, y = check_binary_training(X, y)
    n, d = X.shape
    m = config.features_per_split(d)
    trees = []
    for child in np.random.SeedSequence(config.rng_seed).spawn(config.n_estimators):
        rng = np.random.default_rng(child)
        idx = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
        trees.append(
            fit_decision_tree(X[idx], y[idx], max_depth=config.max_depth,
                              max_features=m if m < d else None, rng=rng)
        )
    return RandomForestModel(trees=trees, config=config, n_features=d)
