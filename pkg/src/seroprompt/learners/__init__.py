"""Classical learners: gradient boosting (also used for feature selection),
AdaBoost, random forest and k-NN, all binary and single-objective."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal, Union

import numpy as np

from ..cohort import Cohort
from .ensembles import (
    AdaBoostConfig,
    AdaBoostModel,
    RandomForestConfig,
    RandomForestModel,
    fit_adaboost,
    fit_random_forest,
)
from .gbdt import (
    DegenerateFitError,
    GbdtConfig,
    GbdtModel,
    ImportanceRanking,
    feature_importance,
    fit_gbdt,
)
from .knn import KnnConfig, KnnModel, fit_knn
from .tree import DecisionTree, best_split, fit_decision_tree, grow_tree

Model = Union[GbdtModel, AdaBoostModel, RandomForestModel, KnnModel]
Target = Literal["severity", "outcome"]
TARGETS: tuple[Target, ...] = ("severity", "outcome")

MODEL_FORMAT = "seroprompt.learner"
MODEL_FORMAT_VERSION = 1
_KINDS = {
    "gbdt": GbdtModel,
    "adaboost": AdaBoostModel,
    "random_forest": RandomForestModel,
    "knn": KnnModel,
}


class SchemaMismatchError(ValueError):
    pass


def _as_matrix(model: Model, x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise SchemaMismatchError(f"model expects {model.n_features} features, got shape {x.shape}")
    if not np.all(np.isfinite(X)):
        raise SchemaMismatchError("classical learners need dense (imputed) inputs")
    return X, single


def predict_proba(model: Model, x: np.ndarray) -> float | np.ndarray:
    """Probability of class 1 for one sample (1-D) or a matrix of samples."""
    X, single = _as_matrix(model, x)
    p = model.predict_proba(X)
    return float(p[0]) if single else p


def predict(model: Model, x: np.ndarray) -> int | np.ndarray:
    X, single = _as_matrix(model, x)
    c = model.predict(X)
    return int(c[0]) if single else c


def model_kind(model: Model) -> str:
    for kind, cls in _KINDS.items():
        if isinstance(model, cls):
            return kind
    raise TypeError(f"not a learner model: {type(model).__name__}")


def save_model(model: Model, path: str | Path, meta: dict[str, Any] | None = None) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "kind": model_kind(model),
        "meta": meta or {},
        "model": model.to_dict(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> Model:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a learner artifact")
    if payload.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported artifact version {payload.get('version')}")
    return _KINDS[payload["kind"]].from_dict(payload["model"])


def rank_features(train: Cohort, config: GbdtConfig = GbdtConfig()) -> dict[Target, ImportanceRanking]:
    """One gradient-boosting fit per target on a dense cohort; importance of each."""
    names = train.schema.names
    X = train.matrix(names)
    out = {}
    for target in TARGETS:
        model = fit_gbdt(X, train.labels(target), config)
        out[target] = feature_importance(model, names)
    return out


def union_top_k(rankings: dict[Target, ImportanceRanking], k: int) -> list[str]:
    """Union of each ranking's top ``k``, by the larger of the two importances.

    Ties keep the order in which features appear in the first ranking.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    chosen: dict[str, float] = {}
    for ranking in rankings.values():
        scores = ranking.as_dict()
        for name in ranking.top_k(k):
            chosen[name] = max(chosen.get(name, 0.0), scores[name])
    first = next(iter(rankings.values())).feature_names
    return sorted(chosen, key=lambda n: (-chosen[n], first.index(n)))


def select_top_k_union(train: Cohort, k: int = 5, config: GbdtConfig = GbdtConfig()) -> list[str]:
    return union_top_k(rank_features(train, config), k)


def fit_learner(kind: str, X: np.ndarray, y: np.ndarray, config: Any = None) -> Model:
    if kind == "gbdt":
        return fit_gbdt(X, y, config or GbdtConfig())
    if kind == "adaboost":
        return fit_adaboost(X, y, config or AdaBoostConfig())
    if kind == "random_forest":
        return fit_random_forest(X, y, config or RandomForestConfig())
    if kind == "knn":
        return fit_knn(X, y, config or KnnConfig())
    raise ValueError(f"unknown learner {kind!r}")


__all__ = [
    "AdaBoostConfig",
    "AdaBoostModel",
    "DecisionTree",
    "DegenerateFitError",
    "GbdtConfig",
    "GbdtModel",
    "ImportanceRanking",
    "KnnConfig",
    "KnnModel",
    "Model",
    "RandomForestConfig",
    "RandomForestModel",
    "SchemaMismatchError",
    "TARGETS",
    "best_split",
    "feature_importance",
    "fit_adaboost",
    "fit_decision_tree",
    "fit_gbdt",
    "fit_knn",
    "fit_learner",
    "fit_random_forest",
    "grow_tree",
    "load_model",
    "predict",
    "predict_proba",
    "rank_features",
    "save_model",
    "select_top_k_union",
    "union_top_k",
]
