import math

import numpy as np
import pytest

from seroprompt.cohort import (
    Cohort,
    CohortError,
    CohortSpec,
    CohortSpecError,
    FeatureSchema,
    SampleRecord,
    cohort_summary,
    format_number,
    generate_cohort,
    load_cohort_csv,
    save_cohort_csv,
)


@pytest.fixture(scope="module")
def default_cohort():
    return generate_cohort(CohortSpec())


def test_default_cohort_shape(default_cohort):
    s = cohort_summary(default_cohort)
    assert s.n_patients == 616
    # severity and death are exact quantile thresholds on the latent risk
    assert round(s.severe_rate * 616) == 248
    assert round(s.death_rate * 616) == 46
    assert abs(s.age_mean - 61) < 2.5
    assert abs(s.male_rate - 0.485) < 0.06
    lo, hi = CohortSpec().samples_per_patient
    per_patient = np.bincount(np.unique([x.patient_id for x in default_cohort.samples], return_inverse=True)[1])
    assert per_patient.min() >= lo and per_patient.max() <= hi


def test_no_mild_deaths_by_default(default_cohort):
    assert not any(s.severity == 0 and s.outcome == 1 for s in default_cohort.samples)


def test_labels_constant_within_patient(default_cohort):
    seen = {}
    for s in default_cohort.samples:
        assert seen.setdefault(s.patient_id, (s.severity, s.outcome)) == (s.severity, s.outcome)


def test_generation_is_deterministic():
    spec = CohortSpec(n_patients=50, rng_seed=7)
    assert generate_cohort(spec) == generate_cohort(spec)
    assert generate_cohort(spec) != generate_cohort(CohortSpec(n_patients=50, rng_seed=8))


def test_missing_rate_is_exact_count():
    spec = CohortSpec.from_dict({"n_patients": 200, "missing_rate": 0.25, "rng_seed": 1})
    c = generate_cohort(spec)
    m = c.matrix()
    expected = math.floor(0.25 * len(c))
    assert (np.isnan(m).sum(axis=0) == expected).all()


def test_masks_nested_across_rates():
    lo = generate_cohort(CohortSpec.from_dict({"n_patients": 120, "missing_rate": 0.1, "rng_seed": 4}))
    hi = generate_cohort(CohortSpec.from_dict({"n_patients": 120, "missing_rate": 0.4, "rng_seed": 4}))
    a, b = np.isnan(lo.matrix()), np.isnan(hi.matrix())
    assert (a <= b).all()
    # observed values agree wherever both are present
    both = ~a & ~b
    assert np.array_equal(lo.matrix()[both], hi.matrix()[both])


def test_planted_effect_direction():
    spec = CohortSpec.from_dict({
        "n_patients": 400,
        "features": ["Age", "LYMPH%", "D-Dimer", "ALB"],
        "effect_weights": {"severity": {"D-Dimer": 2.0}, "outcome": {}},
        "missing_rate": 0.0,
        "rng_seed": 2,
    })
    c = generate_cohort(spec)
    x = c.matrix(["D-Dimer"])[:, 0]
    y = c.labels("severity")
    assert np.median(x[y == 1]) > np.median(x[y == 0])


@pytest.mark.parametrize("overrides, field", [
    ({"n_patients": 0}, "n_patients"),
    ({"severe_rate": 1.5}, "severe_rate"),
    ({"samples_per_patient": [3, 1]}, "samples_per_patient"),
    ({"missing_rate": {"Nope": 0.1}}, "missing_rate.Nope"),
    ({"effect_weights": {"severity": {"Nope": 1.0}}}, "effect_weights.severity.Nope"),
    ({"bogus": 1}, "bogus"),
])
def test_spec_validation_names_field(overrides, field):
    with pytest.raises(CohortSpecError) as info:
        CohortSpec.from_dict(overrides)
    assert field in info.value.fields


def test_spec_roundtrip():
    spec = CohortSpec.from_dict({"n_patients": 30, "features": ["Age", "ALB"], "missing_rate": 0.2})
    again = CohortSpec.from_dict(spec.to_dict())
    assert generate_cohort(spec) == generate_cohort(again)


def test_csv_roundtrip(tmp_path, default_cohort):
    path = tmp_path / "c.csv"
    save_cohort_csv(default_cohort, path, comment="hello")
    assert path.read_text().startswith("# hello\n")
    assert load_cohort_csv(path, default_cohort.schema) == default_cohort


def _write(tmp_path, text):
    p = tmp_path / "x.csv"
    p.write_text(text)
    return p


def test_csv_errors(tmp_path):
    schema = FeatureSchema.from_names([{"name": "Age"}, {"name": "HBP", "kind": "binary"}])
    head = "patient_id,sample_id,severity,outcome,Age,HBP\n"
    with pytest.raises(CohortError, match="column"):
        load_cohort_csv(_write(tmp_path, "patient_id,sample_id,severity,outcome,Age\nP1,S1,0,0,3\n"), schema)
    with pytest.raises(CohortError, match="non-numeric"):
        load_cohort_csv(_write(tmp_path, head + "P1,S1,0,0,abc,1\n"), schema)
    with pytest.raises(CohortError):
        load_cohort_csv(_write(tmp_path, head + "P1,S1,2,0,3,1\n"), schema)
    with pytest.raises(CohortError):
        load_cohort_csv(_write(tmp_path, head + "P1,S1,0,0,3,1\nP1,S2,1,0,4,1\n"), schema)
    with pytest.raises(CohortError):
        load_cohort_csv(_write(tmp_path, head + "P1,S1,0,0,3,0.5\n"), schema)
    ok = load_cohort_csv(_write(tmp_path, "# c\n" + head + "P1,S1,0,0,,1\n"), schema)
    assert ok.samples[0].values["Age"] is None


def test_cohort_invariants():
    schema = FeatureSchema.from_names([{"name": "Age"}])
    rec = SampleRecord("P1", "S1", {"Age": 1.0}, 0, 0)
    with pytest.raises(CohortError):
        Cohort(schema, (rec, rec))
    with pytest.raises(CohortError):
        Cohort(schema, (SampleRecord("P1", "S1", {"Zzz": 1.0}, 0, 0),))


@pytest.mark.parametrize("value, text", [(61.0, "61"), (0.1, "0.1"), (-2.5, "-2.5"), (1e-7, "1e-07"), (3.0000000000000004, "3.0000000000000004")])
def test_format_number(value, text):
    assert format_number(value) == text
    assert float(text) == value


def test_format_number_rejects_nan():
    with pytest.raises(CohortError):
        format_number(float("nan"))
