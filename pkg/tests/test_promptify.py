import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seroprompt.cohort import Cohort, CohortError, CohortSpec, FeatureSchema, SampleRecord, generate_cohort
from seroprompt.promptify import (
    INSTRUCTION,
    MISSING_TEXT,
    SPECIALS,
    ConstraintViolation,
    LabelPair,
    ParseError,
    Vocabulary,
    encode_cohort,
    export_prompts_jsonl,
    fit_binning,
    parse_output,
    record_from_values,
    render_target,
    serialize_prompt,
    tokenize,
)

SCHEMA = FeatureSchema.from_names([
    {"name": "Age", "unit": "years"},
    {"name": "HBP", "kind": "binary"},
    {"name": "hs-CRP", "label": "hs-CRP"},
])


def cohort_of(values_list):
    samples = tuple(
        SampleRecord(f"P{i}", f"P{i}-S1", v, i % 2, 0) for i, v in enumerate(values_list)
    )
    return Cohort(SCHEMA, samples)


def test_prompt_text_layout():
    rec = SampleRecord("P1", "S1", {"Age": 61.0, "HBP": 1.0, "hs-CRP": None}, 1, 1)
    doc = serialize_prompt(rec, SCHEMA, with_target=True)
    assert doc.text == f"{INSTRUCTION}\nAge: 61\nHBP: 1\nhs-CRP: {MISSING_TEXT}"
    assert doc.target_text == "severe and death"
    assert doc.is_missing(2) and not doc.is_missing(0)
    assert INSTRUCTION.startswith("As an experienced clinical medicine expert")


def test_prompt_rejects_unknown_feature():
    rec = SampleRecord("P1", "S1", {"Age": 1.0, "Other": 2.0}, 0, 0)
    with pytest.raises(CohortError):
        serialize_prompt(rec, SCHEMA)


@pytest.mark.parametrize("text, pair", [
    ("mild and survive", ("mild", "survive")),
    ("  Severe and Death\n", ("severe", "death")),
    ("severe and survive", ("severe", "survive")),
])
def test_parse_output(text, pair):
    got = parse_output(text)
    assert (got.severity, got.outcome) == pair
    assert parse_output(render_target(*pair)) == got


def test_parse_output_errors():
    with pytest.raises(ConstraintViolation):
        parse_output("mild and death")
    with pytest.raises(ParseError) as info:
        parse_output("moderate and survive")
    assert info.value.raw == "moderate and survive"
    with pytest.raises(ParseError):
        parse_output("mild, survive")


def test_label_pair_bits():
    assert LabelPair.from_binary(1, 1) == LabelPair("severe", "death")
    bad = LabelPair.unchecked("mild", "death")
    assert not bad.is_valid and bad.outcome_bit == 1 and bad.severity_bit == 0
    with pytest.raises(ConstraintViolation):
        LabelPair.from_binary(0, 1)


def test_export_jsonl(tmp_path):
    c = cohort_of([{"Age": 50.0, "HBP": 0.0, "hs-CRP": 2.5}, {"Age": None, "HBP": 1.0, "hs-CRP": 1.0}])
    path = tmp_path / "p.jsonl"
    export_prompts_jsonl(c, path, extra={"seed": 4})
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert [r["target"] for r in rows] == ["mild and survive", "severe and survive"]
    assert rows[1]["prompt"].endswith(f"Age: {MISSING_TEXT}\nHBP: 1\nhs-CRP: 1")
    assert all(r["seed"] == 4 for r in rows)


def _oracle_bin(value, observed, n_bins):
    lo, hi = min(observed), max(observed)
    if value <= lo:
        return 0
    if value >= hi:
        return n_bins - 1
    qs = np.quantile(np.array(observed), [j / (n_bins - 1) for j in range(1, n_bins - 1)])
    cuts = sorted({q for q in qs if lo < q < hi})
    return 1 + sum(c < value for c in cuts)


@settings(max_examples=80, deadline=None)
@given(
    observed=st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=40),
    probes=st.lists(st.floats(-150, 150, allow_nan=False), min_size=1, max_size=10),
    n_bins=st.integers(3, 20),
)
def test_binning_rule(observed, probes, n_bins):
    c = cohort_of([{"Age": v, "HBP": 0.0, "hs-CRP": 1.0} for v in observed])
    b = fit_binning(c, n_bins).features["Age"]
    assert b.bin(min(observed)) == 0
    assert b.bin(max(observed)) == (n_bins - 1 if max(observed) > min(observed) else 0)
    got = [b.bin(v) for v in sorted(probes)]
    assert got == sorted(got)
    assert all(0 <= g < n_bins for g in got)
    for v in probes:
        assert b.bin(v) == _oracle_bin(v, observed, n_bins)


def test_binning_needs_observed_values():
    c = cohort_of([{"Age": None, "HBP": 0.0, "hs-CRP": 1.0}])
    with pytest.raises(CohortError):
        fit_binning(c)


def test_vocabulary_layout():
    c = generate_cohort(CohortSpec.from_dict({"n_patients": 40, "features": ["Age", "HBP", "hs-CRP"]}))
    binning = fit_binning(c, 6)
    vocab = Vocabulary.build(c.schema, binning)
    assert vocab.tokens[:9] == SPECIALS
    assert vocab.tokens[9] == "<name:Age>"
    assert vocab.tokens[10:16] == tuple(f"<bin:Age:{b}>" for b in range(6))
    assert vocab.id("<bin:HBP:1>") == vocab.id("<name:HBP>") + 2
    assert len(vocab) == 9 + (1 + 6) + (1 + 2) + (1 + 6)
    assert Vocabulary.from_dict(vocab.to_dict()).fingerprint() == vocab.fingerprint()


def test_tokenize_sequence():
    c = cohort_of([{"Age": 10.0, "HBP": 1.0, "hs-CRP": 3.0}, {"Age": 30.0, "HBP": 0.0, "hs-CRP": None}])
    binning = fit_binning(c, 4)
    vocab = Vocabulary.build(SCHEMA, binning)
    rec = c.samples[1]
    seq = tokenize(serialize_prompt(rec, SCHEMA), binning, vocab, LabelPair("severe", "survive"))
    expected = [
        vocab.instr,
        vocab.id("<name:Age>"), vocab.id("<bin:Age:3>"),
        vocab.id("<name:HBP>"), vocab.id("<bin:HBP:0>"),
        vocab.id("<name:hs-CRP>"), vocab.missing,
        vocab.sep, vocab.answer, vocab.sev_severe, vocab.out_survive, vocab.end,
    ]
    assert list(seq.ids) == expected
    assert seq.answer_position == 8
    ids, targets = encode_cohort(c, binning, vocab)
    assert ids.shape == (2, 9) and list(ids[1]) == expected[:9]
    assert targets[1] == LabelPair("severe", "survive")


def test_record_from_values():
    rec = record_from_values({"Age": 3}, SCHEMA)
    assert rec.values == {"Age": 3.0, "HBP": None, "hs-CRP": None}
    with pytest.raises(CohortError):
        record_from_values({"Nope": 1.0}, SCHEMA)
