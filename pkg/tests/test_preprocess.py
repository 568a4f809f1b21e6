import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seroprompt.cohort import Cohort, CohortSpec, FeatureSchema, SampleRecord, generate_cohort
from seroprompt.preprocess import (
    ImputeModel,
    PreprocessConfig,
    UnfittableFeatureError,
    apply_impute,
    drop_high_missing_features,
    fit_impute,
    missing_fractions,
    patient_split,
)

SCHEMA = FeatureSchema.from_names([{"name": "a"}, {"name": "b"}, {"name": "flag", "kind": "binary"}])


def make(rows):
    """rows: (patient, a, b, flag)."""
    samples = []
    for i, (p, a, b, f) in enumerate(rows):
        samples.append(SampleRecord(p, f"{p}-{i}", {"a": a, "b": b, "flag": f}, 0, 0))
    return Cohort(SCHEMA, tuple(samples))


def test_drop_is_strictly_greater():
    # 10 samples: a missing 1/10 (kept at 0.10), b missing 2/10 (dropped)
    rows = [("P%d" % i, None if i == 0 else 1.0, None if i < 2 else 2.0, 1.0) for i in range(10)]
    c = make(rows)
    assert missing_fractions(c) == {"a": 0.1, "b": 0.2, "flag": 0.0}
    kept, dropped = drop_high_missing_features(c, 0.10)
    assert dropped == ["b"]
    assert kept.schema.names == ["a", "flag"]


def test_split_sizes_and_disjoint():
    c = generate_cohort(CohortSpec(n_patients=616, rng_seed=0))
    sp = patient_split(c, 0.7, 0)
    assert len(sp.train_patient_ids) == math.ceil(0.7 * 616)
    assert sp.train_patient_ids.isdisjoint(sp.test_patient_ids)
    assert len(sp.train) + len(sp.test) == len(c)
    assert patient_split(c, 0.7, 0) == sp


@settings(max_examples=60, deadline=None)
@given(
    counts=st.lists(st.integers(1, 4), min_size=2, max_size=40),
    ratio=st.floats(0.01, 0.99),
    seed=st.integers(0, 2**32 - 1),
)
def test_split_properties(counts, ratio, seed):
    rows = [(f"P{p}", 1.0, 1.0, 0.0) for p, k in enumerate(counts) for _ in range(k)]
    c = make(rows)
    sp = patient_split(c, ratio, seed)
    assert sp.train_patient_ids.isdisjoint(sp.test_patient_ids)
    assert sp.train_patient_ids | sp.test_patient_ids == set(c.patient_ids)
    assert sp.train_patient_ids and sp.test_patient_ids
    assert {s.patient_id for s in sp.train.samples} == sp.train_patient_ids
    assert {s.patient_id for s in sp.test.samples} == sp.test_patient_ids


@settings(max_examples=60, deadline=None)
@given(values=st.lists(st.one_of(st.none(), st.floats(-1e6, 1e6)), min_size=1, max_size=30))
def test_impute_properties(values):
    if all(v is None for v in values):
        values = values + [0.0]
    rows = [(f"P{i}", v, 1.0, 1.0) for i, v in enumerate(values)]
    c = make(rows)
    for strategy in ("mean", "median"):
        model = fit_impute(c, strategy)
        observed = [v for v in values if v is not None]
        expected = math.fsum(observed) / len(observed) if strategy == "mean" else statistics.median(observed)
        assert model.fills["a"] == pytest.approx(expected, rel=1e-12, abs=1e-9)
        dense = apply_impute(model, c)
        assert not np.isnan(dense.matrix()).any()
        for before, after in zip(c.samples, dense.samples):
            if before.values["a"] is not None:
                assert after.values["a"] == before.values["a"]


def test_binary_filled_with_majority():
    rows = [("P1", 1.0, 1.0, 1.0), ("P2", 1.0, 1.0, 0.0), ("P3", 1.0, 1.0, 0.0), ("P4", 1.0, 1.0, None)]
    model = fit_impute(make(rows))
    assert model.fills["flag"] == 0.0
    tie = [("P1", 1.0, 1.0, 1.0), ("P2", 1.0, 1.0, 0.0)]
    assert fit_impute(make(tie)).fills["flag"] == 1.0


def test_unfittable_feature():
    rows = [("P1", None, 1.0, 1.0), ("P2", None, 2.0, 0.0)]
    with pytest.raises(UnfittableFeatureError) as info:
        fit_impute(make(rows))
    assert info.value.feature == "a"


def test_impute_roundtrip():
    model = ImputeModel(fills={"a": 1.5, "b": 2.0, "flag": 1.0}, strategy="median")
    assert ImputeModel.from_dict(model.to_dict()) == model


def test_config_validation():
    with pytest.raises(ValueError):
        PreprocessConfig(split_ratio=1.0)
    with pytest.raises(ValueError):
        PreprocessConfig(impute_strategy="mode")
