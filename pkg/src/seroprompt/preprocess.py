"""Missingness filter, patient-level split and train-fitted imputation."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, replace
from typing import Any, Literal, Mapping

import numpy as np

from .cohort import Cohort, CohortError

ImputeStrategy = Literal["mean", "median"]


class UnfittableFeatureError(CohortError):
    def __init__(self, feature: str):
        super().__init__(f"feature {feature!r} has no observed training values")
        self.feature = feature


@dataclass(frozen=True)
class PreprocessConfig:
    missing_threshold: float = 0.10
    split_ratio: float = 0.70
    rng_seed: int = 0
    impute_strategy: ImputeStrategy = "mean"

    def __post_init__(self):
        if not 0 < self.missing_threshold < 1:
            raise ValueError(f"missing_threshold must be in (0, 1), got {self.missing_threshold}")
        if not 0 < self.split_ratio < 1:
            raise ValueError(f"split_ratio must be in (0, 1), got {self.split_ratio}")
        if self.impute_strategy not in ("mean", "median"):
            raise ValueError(f"impute_strategy must be mean or median, got {self.impute_strategy!r}")


def missing_fractions(cohort: Cohort) -> dict[str, float]:
    n = len(cohort)
    out = {}
    for name in cohort.schema.names:
        absent = sum(1 for s in cohort.samples if s.values.get(name) is None)
        out[name] = absent / n if n else 0.0
    return out


def drop_high_missing_features(cohort: Cohort, threshold: float) -> tuple[Cohort, list[str]]:
    """Drop features whose missing fraction is strictly greater than ``threshold``."""
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    fractions = missing_fractions(cohort)
    dropped = [n for n in cohort.schema.names if fractions[n] > threshold]
    kept = [n for n in cohort.schema.names if n not in dropped]
    return cohort.with_schema(cohort.schema.subset(kept)), dropped


@dataclass(frozen=True)
class SplitResult:
    train: Cohort
    test: Cohort
    train_patient_ids: frozenset[str]
    test_patient_ids: frozenset[str]


def patient_split(cohort: Cohort, ratio: float, rng_seed: int) -> SplitResult:
    """Shuffle patients by seed; the first ceil(ratio * P) go to training."""
    patients = cohort.patient_ids
    if len(patients) < 2:
        raise CohortError("patient_split needs at least 2 patients")
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    order = np.random.default_rng(rng_seed).permutation(len(patients))
    n_train = min(max(math.ceil(ratio * len(patients) - 1e-9), 1), len(patients) - 1)
    train_ids = frozenset(patients[i] for i in order[:n_train])
    test_ids = frozenset(patients[i] for i in order[n_train:])
    return SplitResult(
        train=cohort.select_patients(train_ids),
        test=cohort.select_patients(test_ids),
        train_patient_ids=train_ids,
        test_patient_ids=test_ids,
    )


@dataclass(frozen=True)
class ImputeModel:
    fills: Mapping[str, float]
    strategy: ImputeStrategy

    def to_dict(self) -> dict[str, Any]:
        return {"strategy": self.strategy, "fills": dict(self.fills)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ImputeModel":
        return cls(fills={k: float(v) for k, v in data["fills"].items()}, strategy=data["strategy"])


def fit_impute(train: Cohort, strategy: ImputeStrategy = "mean") -> ImputeModel:
    """Per-feature mean or median of the observed training values.

    Binary features are filled with their majority value (ties go to 1) so
    that imputed cohorts keep binary columns in {0, 1}.
    """
    if strategy not in ("mean", "median"):
        raise ValueError(f"unknown impute strategy {strategy!r}")
    fills = {}
    for name in train.schema.names:
        observed = [s.values[name] for s in train.samples if s.values.get(name) is not None]
        if not observed:
            raise UnfittableFeatureError(name)
        if train.schema.get(name).kind == "binary":
            fills[name] = 1.0 if 2 * sum(observed) >= len(observed) else 0.0
        elif strategy == "mean":
            fills[name] = math.fsum(observed) / len(observed)
        else:
            fills[name] = float(statistics.median(observed))
    return ImputeModel(fills=fills, strategy=strategy)


def apply_impute(model: ImputeModel, cohort: Cohort) -> Cohort:
    """Replace every missing value by the fitted fill; observed values are untouched."""
    absent = [n for n in cohort.schema.names if n not in model.fills]
    if absent:
        raise CohortError(f"impute model has no fill for {absent}")
    samples = []
    for s in cohort.samples:
        values = {n: (model.fills[n] if s.values.get(n) is None else s.values[n]) for n in cohort.schema.names}
        samples.append(replace(s, values=values))
    return Cohort(cohort.schema, tuple(samples))
