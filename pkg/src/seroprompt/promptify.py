"""Prompt serialization, closed-vocabulary tokenization and answer parsing.

A sample becomes a text prompt: the fixed task instruction followed by one
``<label>: <value>`` line per feature, where an absent value is spelled out
as a sentence instead of being imputed. The sequence model reads the same
prompt through a small closed vocabulary: a name token per feature
followed by either a quantile-bin token for that feature or the shared
MISSING token.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal, Mapping, Sequence

import numpy as np

from .cohort import Cohort, CohortError, FeatureSchema, SampleRecord, format_number

INSTRUCTION = (
    "As an experienced clinical medicine expert, predict COVID-19 severity (severe/mild) "
    "and predict clinical outcome (survive/death) based on serum report. "
    "The serum report is as follows."
)
MISSING_TEXT = "This feature's value is missing"

Severity = Literal["mild", "severe"]
Outcome = Literal["survive", "death"]


class ParseError(ValueError):
    """Model output text is not one of the four answer phrases."""

    def __init__(self, raw: str):
        super().__init__(f"unrecognized answer text: {raw!r}")
        self.raw = raw


class ConstraintViolation(ValueError):
    """The structurally impossible (mild, death) pair was requested."""


@dataclass(frozen=True)
class LabelPair:
    severity: Severity
    outcome: Outcome

    def __post_init__(self):
        if self.severity not in ("mild", "severe"):
            raise ValueError(f"bad severity {self.severity!r}")
        if self.outcome not in ("survive", "death"):
            raise ValueError(f"bad outcome {self.outcome!r}")
        if (self.severity, self.outcome) == ("mild", "death"):
            raise ConstraintViolation("(mild, death) is not a valid label pair")

    @classmethod
    def unchecked(cls, severity: Severity, outcome: Outcome) -> "LabelPair":
        """Build a pair without the (mild, death) check; for ablations only."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "severity", severity)
        object.__setattr__(obj, "outcome", outcome)
        return obj

    @classmethod
    def from_binary(cls, severity: int, outcome: int) -> "LabelPair":
        return cls("severe" if severity else "mild", "death" if outcome else "survive")

    @property
    def severity_bit(self) -> int:
        return int(self.severity == "severe")

    @property
    def outcome_bit(self) -> int:
        return int(self.outcome == "death")

    @property
    def is_valid(self) -> bool:
        return (self.severity, self.outcome) != ("mild", "death")


def render_target(severity: Severity, outcome: Outcome) -> str:
    return f"{severity} and {outcome}"


_ANSWER = re.compile(r"^(mild|severe) and (survive|death)$")


def parse_output(text: str) -> LabelPair:
    """Parse an answer phrase (case- and surrounding-whitespace-insensitive)."""
    m = _ANSWER.match(text.strip().lower())
    if m is None:
        raise ParseError(text)
    return LabelPair(m.group(1), m.group(2))  # raises ConstraintViolation for mild/death


# ---------------------------------------------------------------------------
# Prompt text
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PromptDoc:
    sample_id: str
    instruction: str
    feature_lines: tuple[tuple[str, str], ...]
    feature_names: tuple[str, ...]
    target_text: str | None = None

    @property
    def text(self) -> str:
        lines = [self.instruction] + [f"{label}: {value}" for label, value in self.feature_lines]
        return "\n".join(lines)

    def is_missing(self, i: int) -> bool:
        return self.feature_lines[i][1] == MISSING_TEXT


def serialize_prompt(record: SampleRecord, schema: FeatureSchema, with_target: bool = False) -> PromptDoc:
    unknown = [k for k in record.values if k not in schema]
    if unknown:
        raise CohortError(f"sample {record.sample_id}: features {unknown} not in schema")
    lines = []
    for f in schema.ordered:
        v = record.values.get(f.name)
        lines.append((f.label, MISSING_TEXT if v is None else format_number(v)))
    target = None
    if with_target:
        pair = LabelPair.unchecked("severe" if record.severity else "mild", "death" if record.outcome else "survive")
        target = render_target(pair.severity, pair.outcome)
    return PromptDoc(
        sample_id=record.sample_id,
        instruction=INSTRUCTION,
        feature_lines=tuple(lines),
        feature_names=tuple(schema.names),
        target_text=target,
    )


def export_prompts_jsonl(cohort: Cohort, path: str | Path, extra: Mapping[str, Any] | None = None) -> None:
    """One JSON object per line: sample_id, prompt, target (plus ``extra`` keys)."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for s in cohort.samples:
            doc = serialize_prompt(s, cohort.schema, with_target=True)
            row = {"sample_id": s.sample_id, "prompt": doc.text, "target": doc.target_text}
            row.update(extra or {})
            fh.write(json.dumps(row, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Binning and tokenization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureBins:
    kind: str
    n_bins: int
    lower: float = 0.0
    upper: float = 1.0
    cuts: tuple[float, ...] = ()

    def bin(self, value: float) -> int:
        """Bin index: 0 at or below the training minimum, ``n_bins - 1`` at or
        above the maximum, otherwise the number of cut points (the minimum
        plus the interior quantiles) strictly below the value."""
        if self.kind == "binary":
            return 1 if value >= 0.5 else 0
        if value <= self.lower:
            return 0
        if value >= self.upper:
            return self.n_bins - 1
        return 1 + int(np.searchsorted(np.asarray(self.cuts), value, side="left"))


@dataclass(frozen=True)
class BinningModel:
    features: Mapping[str, FeatureBins]
    n_bins: int

    def bin(self, name: str, value: float) -> int:
        try:
            return self.features[name].bin(value)
        except KeyError:
            raise CohortError(f"feature {name!r} was not fitted by the binning model") from None

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_bins": self.n_bins,
            "features": {
                n: {"kind": b.kind, "n_bins": b.n_bins, "lower": b.lower, "upper": b.upper, "cuts": list(b.cuts)}
                for n, b in self.features.items()
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BinningModel":
        feats = {
            n: FeatureBins(kind=b["kind"], n_bins=int(b["n_bins"]), lower=float(b["lower"]),
                           upper=float(b["upper"]), cuts=tuple(float(c) for c in b["cuts"]))
            for n, b in data["features"].items()
        }
        return cls(features=feats, n_bins=int(data["n_bins"]))


def fit_binning(train: Cohort, n_bins: int = 16) -> BinningModel:
    """Quantile bins per continuous feature from observed training values.

    ``n_bins - 2`` interior cut points sit at quantiles ``j / (n_bins - 1)``
    of the observed values; together with the training minimum they split
    the range into bins 1..n_bins-1, and bin 0 holds values at or below the
    minimum. Binary features get two bins.
    """
    if n_bins < 3:
        raise ValueError("n_bins must be >= 3")
    feats = {}
    for f in train.schema.ordered:
        observed = np.array([s.values[f.name] for s in train.samples if s.values.get(f.name) is not None])
        if f.kind == "binary":
            feats[f.name] = FeatureBins(kind="binary", n_bins=2)
            continue
        if observed.size == 0:
            raise CohortError(f"feature {f.name!r} has no observed training values to bin")
        lo, hi = float(observed.min()), float(observed.max())
        qs = np.quantile(observed, np.arange(1, n_bins - 1) / (n_bins - 1))
        cuts = tuple(float(c) for c in np.unique(qs) if lo < c < hi)
        feats[f.name] = FeatureBins(kind="continuous", n_bins=n_bins, lower=lo, upper=hi, cuts=cuts)
    return BinningModel(features=feats, n_bins=n_bins)


SPECIALS = ("<INSTR>", "<SEP>", "<MISSING>", "<ANSWER>", "SEV_MILD", "SEV_SEVERE", "OUT_SURVIVE", "OUT_DEATH", "<END>")


@dataclass(frozen=True)
class Vocabulary:
    """Closed token set: specials, then per feature its name and bin tokens."""

    tokens: tuple[str, ...]
    feature_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.tokens)})

    @classmethod
    def build(cls, schema: FeatureSchema, binning: BinningModel) -> "Vocabulary":
        tokens = list(SPECIALS)
        for f in schema.ordered:
            tokens.append(f"<name:{f.name}>")
            nb = binning.features[f.name].n_bins if f.name in binning.features else 0
            if nb == 0:
                raise CohortError(f"feature {f.name!r} was not fitted by the binning model")
            tokens.extend(f"<bin:{f.name}:{b}>" for b in range(nb))
        return cls(tuple(tokens), tuple(schema.names))

    def __len__(self) -> int:
        return len(self.tokens)

    def id(self, token: str) -> int:
        return self._index[token]

    @property
    def instr(self) -> int:
        return 0

    @property
    def sep(self) -> int:
        return 1

    @property
    def missing(self) -> int:
        return 2

    @property
    def answer(self) -> int:
        return 3

    @property
    def sev_mild(self) -> int:
        return 4

    @property
    def sev_severe(self) -> int:
        return 5

    @property
    def out_survive(self) -> int:
        return 6

    @property
    def out_death(self) -> int:
        return 7

    @property
    def end(self) -> int:
        return 8

    def fingerprint(self) -> str:
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()

    def save_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["token_id", "surface"])
            for i, t in enumerate(self.tokens):
                w.writerow([i, t])

    def to_dict(self) -> dict[str, Any]:
        return {"tokens": list(self.tokens), "feature_names": list(self.feature_names)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Vocabulary":
        return cls(tuple(data["tokens"]), tuple(data["feature_names"]))


@dataclass(frozen=True)
class TokenSeq:
    ids: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def answer_position(self) -> int:
        return self.ids.index(3)

    @property
    def prompt_ids(self) -> tuple[int, ...]:
        """Tokens up to and including the answer marker."""
        return self.ids[: self.answer_position + 1]


def _value_from_line(text: str) -> float | None:
    return None if text == MISSING_TEXT else float(text)


def tokenize(doc: PromptDoc, binning: BinningModel, vocab: Vocabulary, target: LabelPair | None = None) -> TokenSeq:
    """``<INSTR> (name value)* <SEP> <ANSWER>`` plus ``sev out <END>`` when a target is given."""
    if tuple(doc.feature_names) != vocab.feature_names:
        raise CohortError("prompt features do not match the vocabulary")
    ids = [vocab.instr]
    for name, (_, text) in zip(doc.feature_names, doc.feature_lines):
        ids.append(vocab.id(f"<name:{name}>"))
        value = _value_from_line(text)
        if value is None:
            ids.append(vocab.missing)
        else:
            ids.append(vocab.id(f"<bin:{name}:{binning.bin(name, value)}>"))
    ids += [vocab.sep, vocab.answer]
    if target is not None:
        ids += [
            vocab.sev_severe if target.severity == "severe" else vocab.sev_mild,
            vocab.out_death if target.outcome == "death" else vocab.out_survive,
            vocab.end,
        ]
    return TokenSeq(tuple(ids))


def encode_cohort(cohort: Cohort, binning: BinningModel, vocab: Vocabulary) -> tuple[np.ndarray, list[LabelPair]]:
    """Prompt-token matrix (one row per sample, ending at ``<ANSWER>``) and targets."""
    rows, targets = [], []
    for s in cohort.samples:
        doc = serialize_prompt(s, cohort.schema)
        rows.append(tokenize(doc, binning, vocab).ids)
        targets.append(LabelPair.unchecked("severe" if s.severity else "mild", "death" if s.outcome else "survive"))
    width = 2 * len(cohort.schema) + 3
    return np.asarray(rows, dtype=np.int64).reshape(len(rows), width), targets


def record_from_values(values: Mapping[str, float | None], schema: FeatureSchema, sample_id: str = "request") -> SampleRecord:
    """Wrap a bare feature mapping (e.g. a scoring request) as a record."""
    unknown = [k for k in values if k not in schema]
    if unknown:
        raise CohortError(f"unknown feature(s): {unknown}")
    full = {n: (None if values.get(n) is None else float(values[n])) for n in schema.names}
    return SampleRecord(patient_id=sample_id, sample_id=sample_id, values=full, severity=0, outcome=0)


def tokens_for_records(records: Sequence[SampleRecord], schema: FeatureSchema, binning: BinningModel, vocab: Vocabulary) -> np.ndarray:
    rows = [tokenize(serialize_prompt(r, schema), binning, vocab).ids for r in records]
    return np.asarray(rows, dtype=np.int64).reshape(len(rows), 2 * len(schema) + 3)
