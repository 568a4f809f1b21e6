"""k-nearest-neighbour classifier on standardized features."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Mapping

import numpy as np

from .gbdt import check_binary_training


@dataclass(frozen=True)
class KnnConfig:
    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class KnnModel:
    X: np.ndarray  # standardized, zero-variance columns removed
    y: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    keep: np.ndarray
    config: KnnConfig
    n_features: int

    def _transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return (X[:, self.keep] - self.mean[self.keep]) / self.sd[self.keep]

    def neighbours(self, X: np.ndarray) -> np.ndarray:
        """Indices of the k nearest training rows for each query row.

        Distance ties are broken by label (class 0 first), then by the
        stored coordinates, so the result does not depend on storage order.
        """
        Q = self._transform(X)
        out = np.empty((len(Q), self.config.k), dtype=np.int64)
        for i, q in enumerate(Q):
            dist = np.sum((self.X - q) ** 2, axis=1)
            keys = [self.X[:, j] for j in range(self.X.shape[1] - 1, -1, -1)]
            order = np.lexsort(keys + [self.y, dist])
            out[i] = order[: self.config.k]
        return out

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.y[self.neighbours(X)].mean(axis=1)

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Strict majority vote; an even split goes to class 0."""
        votes = self.y[self.neighbours(X)].sum(axis=1)
        return (2 * votes > self.config.k).astype(np.int64)

    def to_dict(self) -> dict[str, Any]:
        return {
            "X": self.X.tolist(),
            "y": self.y.tolist(),
            "mean": self.mean.tolist(),
            "sd": self.sd.tolist(),
            "keep": self.keep.tolist(),
            "config": asdict(self.config),
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "KnnModel":
        return cls(
            X=np.asarray(data["X"], dtype=float).reshape(len(data["y"]), -1),
            y=np.asarray(data["y"], dtype=np.int64),
            mean=np.asarray(data["mean"], dtype=float),
            sd=np.asarray(data["sd"], dtype=float),
            keep=np.asarray(data["keep"], dtype=bool),
            config=KnnConfig(**data["config"]),
            n_features=int(data["n_features"]),
        )


def fit_knn(X: np.ndarray, y: np.ndarray, config: KnnConfig = KnnConfig()) -> KnnModel:
    X, y = check_binary_training(X, y)
    if config.k > len(y):
        raise ValueError(f"k={config.k} exceeds the {len(y)} training samples")
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    keep = sd > 0
    Z = (X[:, keep] - mean[keep]) / sd[keep]
    return KnnModel(X=Z, y=y.astype(np.int64), mean=mean, sd=sd, keep=keep, config=config, n_features=X.shape[1])
