"""Patient cohort data model, synthetic generation and CSV ingestion.

A cohort is a flat list of blood-test samples grouped by patient. Labels
(severity, outcome) are per patient and are copied onto every sample of
that patient.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Literal, Mapping, Sequence

import numpy as np
from scipy.stats import norm

FeatureKind = Literal["continuous", "binary"]

REQUIRED_COLUMNS = ("patient_id", "sample_id", "severity", "outcome")


class CohortError(ValueError):
    """Raised when a cohort, schema or CSV violates the data model."""


class CohortSpecError(CohortError):
    """Invalid generator spec; ``fields`` lists the offending field names."""

    def __init__(self, fields: Sequence[str], message: str):
        super().__init__(f"invalid cohort spec ({', '.join(fields)}): {message}")
        self.fields = list(fields)


def format_number(value: float) -> str:
    """Shortest decimal text that parses back to the same float (61.0 -> "61")."""
    value = float(value)
    if not math.isfinite(value):
        raise CohortError(f"non-finite value {value!r} cannot be serialized")
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


@dataclass(frozen=True)
class FeatureDef:
    name: str
    label: str
    kind: FeatureKind = "continuous"
    display_order: int = 0
    unit: str = ""


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[FeatureDef, ...]

    def __post_init__(self):
        features = tuple(self.features)
        object.__setattr__(self, "features", features)
        names = [f.name for f in features]
        if any(not n for n in names):
            raise CohortError("feature names must be non-empty")
        if len(set(names)) != len(names):
            raise CohortError(f"duplicate feature names in schema: {names}")
        if sorted(f.display_order for f in features) != list(range(len(features))):
            raise CohortError("display_order must be a permutation of 0..n-1")
        for f in features:
            if f.kind not in ("continuous", "binary"):
                raise CohortError(f"feature {f.name!r} has unknown kind {f.kind!r}")

    @classmethod
    def from_names(cls, defs: Iterable[FeatureDef | Mapping[str, Any]]) -> "FeatureSchema":
        """Build a schema whose display order follows the iteration order."""
        out = []
        for i, d in enumerate(defs):
            if isinstance(d, FeatureDef):
                out.append(replace(d, display_order=i))
            else:
                out.append(
                    FeatureDef(
                        name=d["name"],
                        label=d.get("label", d["name"]),
                        kind=d.get("kind", "continuous"),
                        display_order=i,
                        unit=d.get("unit", ""),
                    )
                )
        return cls(tuple(out))

    @property
    def ordered(self) -> list[FeatureDef]:
        return sorted(self.features, key=lambda f: f.display_order)

    @property
    def names(self) -> list[str]:
        """Feature names in display order."""
        return [f.name for f in self.ordered]

    def __len__(self) -> int:
        return len(self.features)

    def __contains__(self, name: object) -> bool:
        return any(f.name == name for f in self.features)

    def get(self, name: str) -> FeatureDef:
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    def subset(self, names: Iterable[str]) -> "FeatureSchema":
        """Schema restricted to ``names``, keeping their relative display order."""
        keep = set(names)
        missing = keep.difference(self.names)
        if missing:
            raise CohortError(f"features not in schema: {sorted(missing)}")
        return FeatureSchema.from_names(f for f in self.ordered if f.name in keep)

    def reorder(self, names: Sequence[str]) -> "FeatureSchema":
        """Schema with exactly ``names`` in the given display order."""
        return FeatureSchema.from_names(self.get(n) for n in names)

    def to_dict(self) -> list[dict[str, Any]]:
        return [
            {"name": f.name, "label": f.label, "kind": f.kind, "unit": f.unit}
            for f in self.ordered
        ]

    @classmethod
    def from_dict(cls, items: Sequence[Mapping[str, Any]]) -> "FeatureSchema":
        return cls.from_names(items)


@dataclass(frozen=True)
class SampleRecord:
    patient_id: str
    sample_id: str
    values: Mapping[str, float | None]
    severity: int
    outcome: int

    def get(self, name: str) -> float | None:
        return self.values.get(name)


def _check_record(record: SampleRecord, schema: FeatureSchema) -> None:
    for key, value in record.values.items():
        if key not in schema:
            raise CohortError(f"sample {record.sample_id}: unknown feature {key!r}")
        if value is None:
            continue
        if not math.isfinite(value):
            raise CohortError(f"sample {record.sample_id}: non-finite {key}={value}")
        if schema.get(key).kind == "binary" and value not in (0.0, 1.0):
            raise CohortError(f"sample {record.sample_id}: binary feature {key}={value}")
    if record.severity not in (0, 1) or record.outcome not in (0, 1):
        raise CohortError(f"sample {record.sample_id}: labels must be 0 or 1")


@dataclass(frozen=True)
class Cohort:
    """Immutable collection of samples under one schema."""

    schema: FeatureSchema
    samples: tuple[SampleRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        samples = tuple(self.samples)
        object.__setattr__(self, "samples", samples)
        seen: set[str] = set()
        labels: dict[str, tuple[int, int]] = {}
        for s in samples:
            _check_record(s, self.schema)
            if s.sample_id in seen:
                raise CohortError(f"duplicate sample_id {s.sample_id!r}")
            seen.add(s.sample_id)
            pair = (s.severity, s.outcome)
            if labels.setdefault(s.patient_id, pair) != pair:
                raise CohortError(f"conflicting labels for patient {s.patient_id!r}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def patient_ids(self) -> list[str]:
        """Patient ids in order of first appearance."""
        return list(dict.fromkeys(s.patient_id for s in self.samples))

    def patient_labels(self) -> dict[str, tuple[int, int]]:
        return {s.patient_id: (s.severity, s.outcome) for s in self.samples}

    def matrix(self, names: Sequence[str] | None = None) -> np.ndarray:
        """Sample x feature float matrix, NaN where missing."""
        names = self.schema.names if names is None else list(names)
        out = np.full((len(self.samples), len(names)), np.nan)
        for i, s in enumerate(self.samples):
            for j, n in enumerate(names):
                v = s.values.get(n)
                if v is not None:
                    out[i, j] = v
        return out

    def labels(self, target: Literal["severity", "outcome"]) -> np.ndarray:
        return np.array([getattr(s, target) for s in self.samples], dtype=np.int64)

    def select_patients(self, patient_ids: Iterable[str]) -> "Cohort":
        keep = set(patient_ids)
        return Cohort(self.schema, tuple(s for s in self.samples if s.patient_id in keep))

    def with_schema(self, schema: FeatureSchema) -> "Cohort":
        """Project every sample onto ``schema`` (which must be a subset)."""
        names = schema.names
        samples = tuple(
            replace(s, values={n: s.values.get(n) for n in names}) for s in self.samples
        )
        return Cohort(schema, samples)


# ---------------------------------------------------------------------------
# Synthetic generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Marginal:
    """Per-feature synthesis parameters.

    Continuous values are ``loc + scale * z`` (``transform="linear"``) or
    ``exp(loc + scale * z)`` (``"log"``), clipped to [lower, upper] and
    rounded to ``decimals``. Binary values are 1 with probability
    ``prevalence``.
    """

    loc: float = 0.0
    scale: float = 1.0
    transform: Literal["linear", "log"] = "linear"
    lower: float | None = None
    upper: float | None = None
    decimals: int = 2
    prevalence: float = 0.5
    per_patient: bool = False


DEFAULT_FEATURES: tuple[dict[str, Any], ...] = (
    {"name": "Age", "label": "Age", "unit": "years"},
    {"name": "Sex", "label": "Sex", "kind": "binary", "unit": "1=male"},
    {"name": "HBP", "label": "HBP", "kind": "binary", "unit": "1=hypertension"},
    {"name": "DM", "label": "DM", "kind": "binary", "unit": "1=diabetes"},
    {"name": "LYMPH%", "label": "LYMPH%", "unit": "%"},
    {"name": "Neu%", "label": "Neu%", "unit": "%"},
    {"name": "hs-CRP", "label": "hs-CRP", "unit": "mg/L"},
    {"name": "D-Dimer", "label": "D-Dimer", "unit": "ug/mL FEU"},
    {"name": "Cre", "label": "Cre", "unit": "umol/L"},
    {"name": "ALB", "label": "ALB", "unit": "g/L"},
    {"name": "BC", "label": "BC", "unit": "umol/L"},
)

DEFAULT_MARGINALS: dict[str, Marginal] = {
    "Age": Marginal(loc=61.0, scale=14.5, lower=18, upper=100, decimals=0, per_patient=True),
    "Sex": Marginal(prevalence=0.485, per_patient=True),
    "HBP": Marginal(prevalence=0.30, per_patient=True),
    "DM": Marginal(prevalence=0.15, per_patient=True),
    "LYMPH%": Marginal(loc=20.0, scale=9.0, lower=0.5, upper=60.0, decimals=1),
    "Neu%": Marginal(loc=70.0, scale=11.0, lower=30.0, upper=98.0, decimals=1),
    "hs-CRP": Marginal(loc=math.log(30.0), scale=1.2, transform="log", lower=0.1, upper=320.0, decimals=1),
    "D-Dimer": Marginal(loc=math.log(0.8), scale=1.0, transform="log", lower=0.05, upper=21.0, decimals=2),
    "Cre": Marginal(loc=math.log(75.0), scale=0.35, transform="log", lower=20.0, upper=900.0, decimals=0),
    "ALB": Marginal(loc=36.0, scale=5.0, lower=15.0, upper=55.0, decimals=1),
    "BC": Marginal(loc=math.log(4.0), scale=0.5, transform="log", lower=0.5, upper=150.0, decimals=1),
}

DEFAULT_EFFECTS: dict[str, dict[str, float]] = {
    "severity": {"D-Dimer": 0.8, "LYMPH%": -0.9, "Cre": 0.5, "ALB": -0.6, "BC": 0.4},
    "outcome": {"LYMPH%": -0.7, "hs-CRP": 0.8, "Neu%": 0.6, "HBP": 0.5, "Age": 0.6},
}

DEFAULT_MISSING: dict[str, float] = {
    "LYMPH%": 0.04, "Neu%": 0.04, "hs-CRP": 0.08, "D-Dimer": 0.09,
    "Cre": 0.05, "ALB": 0.06, "BC": 0.07,
}


@dataclass(frozen=True)
class CohortSpec:
    """Parameters of the synthetic cohort generator.

    Defaults give a cohort of 616 patients, 40.2%
    severe, 7.4% deaths (46 of 248 severe), age 61 (sd 14.5), 48.5% male.
    """

    n_patients: int = 616
    samples_per_patient: tuple[int, int] = (1, 4)
    severe_rate: float = 248 / 616
    death_given_severe: float = 46 / 248
    death_given_mild: float = 0.0
    age_mean: float = 61.0
    age_sd: float = 14.5
    male_rate: float = 0.485
    features: tuple[dict[str, Any], ...] = DEFAULT_FEATURES
    feature_marginals: Mapping[str, Marginal] = field(default_factory=lambda: dict(DEFAULT_MARGINALS))
    effect_weights: Mapping[str, Mapping[str, float]] = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_EFFECTS.items()})
    missing_rate: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_MISSING))
    noise_sd: float = 1.0
    within_patient_sd: float = 0.3
    rng_seed: int = 0

    @property
    def schema(self) -> FeatureSchema:
        return FeatureSchema.from_names(self.features)

    def validate(self) -> None:
        bad: list[str] = []
        msgs: list[str] = []

        def rate(name: str, value: float) -> None:
            if not (0.0 <= value <= 1.0):
                bad.append(name)
                msgs.append(f"{name}={value} not in [0, 1]")

        if not isinstance(self.n_patients, int) or self.n_patients < 1:
            bad.append("n_patients")
            msgs.append("n_patients must be >= 1")
        lo, hi = self.samples_per_patient
        if lo < 1 or hi < lo:
            bad.append("samples_per_patient")
            msgs.append("samples_per_patient needs 1 <= min <= max")
        for name in ("severe_rate", "death_given_severe", "death_given_mild", "male_rate"):
            rate(name, getattr(self, name))
        if self.age_sd < 0 or self.noise_sd < 0 or self.within_patient_sd < 0:
            bad.append("sd")
            msgs.append("standard deviations must be >= 0")
        try:
            schema = self.schema
        except CohortError as exc:
            bad.append("features")
            msgs.append(str(exc))
            schema = None
        if schema is not None:
            for name in schema.names:
                if name not in self.feature_marginals:
                    bad.append(f"feature_marginals.{name}")
                    msgs.append(f"no marginal for {name}")
            for target, weights in self.effect_weights.items():
                if target not in ("severity", "outcome"):
                    bad.append(f"effect_weights.{target}")
                    msgs.append(f"unknown target {target}")
                for name in weights:
                    if name not in schema:
                        bad.append(f"effect_weights.{target}.{name}")
                        msgs.append(f"unknown feature {name}")
            for name, value in self.missing_rate.items():
                if name not in schema:
                    bad.append(f"missing_rate.{name}")
                    msgs.append(f"unknown feature {name}")
                else:
                    rate(f"missing_rate.{name}", value)
        if bad:
            raise CohortSpecError(bad, "; ".join(msgs))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any] | None) -> "CohortSpec":
        """Overlay a plain (YAML/JSON) mapping onto the shipped defaults.

        ``feature_marginals`` entries are merged field-by-field into the
        default marginal of the same name. If ``features`` is given, only
        the listed features exist and the other per-feature maps are
        filtered to them unless given explicitly.
        """
        data = dict(data or {})
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise CohortSpecError(unknown, "unknown spec keys")
        kwargs: dict[str, Any] = {}
        features = tuple(DEFAULT_FEATURES)
        if "features" in data:
            features = tuple(
                {"name": f} if isinstance(f, str) else dict(f) for f in data.pop("features")
            )
            defaults = {d["name"]: d for d in DEFAULT_FEATURES}
            features = tuple({**defaults.get(f["name"], {}), **f} for f in features)
        kwargs["features"] = features
        names = [f["name"] for f in features]
        marginals = {n: DEFAULT_MARGINALS[n] for n in names if n in DEFAULT_MARGINALS}
        for name, overrides in (data.pop("feature_marginals", None) or {}).items():
            base = marginals.get(name, Marginal())
            try:
                marginals[name] = replace(base, **overrides)
            except TypeError as exc:
                raise CohortSpecError([f"feature_marginals.{name}"], str(exc)) from exc
        kwargs["feature_marginals"] = marginals
        if "effect_weights" in data:
            kwargs["effect_weights"] = {k: dict(v or {}) for k, v in data.pop("effect_weights").items()}
        else:
            kwargs["effect_weights"] = {
                t: {n: w for n, w in ws.items() if n in names} for t, ws in DEFAULT_EFFECTS.items()
            }
        if "missing_rate" in data:
            mr = data.pop("missing_rate")
            if isinstance(mr, (int, float)):
                mr = {n: float(mr) for n in names}
            kwargs["missing_rate"] = dict(mr)
        else:
            kwargs["missing_rate"] = {n: r for n, r in DEFAULT_MISSING.items() if n in names}
        if "samples_per_patient" in data:
            kwargs["samples_per_patient"] = tuple(data.pop("samples_per_patient"))
        kwargs.update(data)
        spec = cls(**kwargs)
        spec.validate()
        return spec

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_patients": self.n_patients,
            "samples_per_patient": list(self.samples_per_patient),
            "severe_rate": self.severe_rate,
            "death_given_severe": self.death_given_severe,
            "death_given_mild": self.death_given_mild,
            "age_mean": self.age_mean,
            "age_sd": self.age_sd,
            "male_rate": self.male_rate,
            "features": [dict(f) for f in self.features],
            "feature_marginals": {
                n: {k: getattr(m, k) for k in Marginal.__dataclass_fields__}
                for n, m in self.feature_marginals.items()
            },
            "effect_weights": {k: dict(v) for k, v in self.effect_weights.items()},
            "missing_rate": dict(self.missing_rate),
            "noise_sd": self.noise_sd,
            "within_patient_sd": self.within_patient_sd,
            "rng_seed": self.rng_seed,
        }


def _top_fraction(scores: np.ndarray, fraction: float) -> np.ndarray:
    """Boolean mask selecting the round(fraction * n) highest scores."""
    n_pos = int(round(fraction * len(scores)))
    mask = np.zeros(len(scores), dtype=bool)
    if n_pos > 0:
        order = np.argsort(-scores, kind="stable")
        mask[order[:n_pos]] = True
    return mask


def generate_cohort(spec: CohortSpec) -> Cohort:
    """Draw a synthetic cohort from a linear latent-risk model.

    Each patient gets a standard-normal latent ``z_f`` per feature. The
    severity risk is ``sum_f w_f * z_f + noise``; the top ``severe_rate``
    fraction of patients by risk are severe. Deaths are the top
    ``death_given_severe`` fraction of severe patients by the outcome
    risk (and likewise for mild patients with ``death_given_mild``).
    Sample values add within-patient jitter to continuous features.
    Missingness is MCAR: for each feature exactly
    ``floor(missing_rate * n_samples)`` randomly chosen cells are blanked.
    """
    spec.validate()
    schema = spec.schema
    names = schema.names
    value_ss, label_ss, count_ss, jitter_ss, mask_ss = np.random.SeedSequence(spec.rng_seed).spawn(5)
    rng_values = np.random.default_rng(value_ss)
    n = spec.n_patients

    marginals = dict(spec.feature_marginals)
    if "Age" in marginals:
        marginals["Age"] = replace(marginals["Age"], loc=spec.age_mean, scale=spec.age_sd)
    if "Sex" in marginals:
        marginals["Sex"] = replace(marginals["Sex"], prevalence=spec.male_rate)

    latent = rng_values.standard_normal((n, len(names)))
    standardized = np.empty_like(latent)
    binary_value = {}
    for j, name in enumerate(names):
        if schema.get(name).kind == "binary":
            p = marginals[name].prevalence
            b = (latent[:, j] > norm.ppf(1.0 - p)).astype(float) if 0 < p < 1 else np.full(n, float(p >= 1))
            binary_value[name] = b
            sd = math.sqrt(p * (1 - p))
            standardized[:, j] = (b - p) / sd if sd > 0 else 0.0
        else:
            standardized[:, j] = latent[:, j]

    rng_labels = np.random.default_rng(label_ss)

    def risk(target: str) -> np.ndarray:
        w = np.array([spec.effect_weights.get(target, {}).get(nm, 0.0) for nm in names])
        return standardized @ w + spec.noise_sd * rng_labels.standard_normal(n)

    sev_risk = risk("severity")
    out_risk = risk("outcome")
    severity = _top_fraction(sev_risk, spec.severe_rate)
    outcome = np.zeros(n, dtype=bool)
    for group, rate in ((severity, spec.death_given_severe), (~severity, spec.death_given_mild)):
        idx = np.flatnonzero(group)
        outcome[idx] = _top_fraction(out_risk[idx], rate)

    lo, hi = spec.samples_per_patient
    counts = np.random.default_rng(count_ss).integers(lo, hi + 1, size=n)
    rng_jitter = np.random.default_rng(jitter_ss)
    width = len(str(n))
    rows: list[tuple[str, str, int, int, dict[str, float | None]]] = []
    for i in range(n):
        pid = f"P{i + 1:0{width}d}"
        for k in range(counts[i]):
            values: dict[str, float | None] = {}
            jitter = rng_jitter.standard_normal(len(names))
            for j, name in enumerate(names):
                m = marginals[name]
                if name in binary_value:
                    values[name] = float(binary_value[name][i])
                    continue
                z = latent[i, j]
                if not m.per_patient:
                    z = z + spec.within_patient_sd * jitter[j]
                v = m.loc + m.scale * z
                if m.transform == "log":
                    v = math.exp(v)
                v = float(np.clip(v, m.lower if m.lower is not None else -np.inf,
                                  m.upper if m.upper is not None else np.inf))
                values[name] = round(v, m.decimals) + 0.0
            rows.append((pid, f"{pid}-S{k + 1:02d}", int(severity[i]), int(outcome[i]), values))

    rng_mask = np.random.default_rng(mask_ss)
    n_samples = len(rows)
    for name in names:
        # one permutation per feature, so masks at a lower rate are nested in higher ones
        perm = rng_mask.permutation(n_samples)
        n_missing = int(math.floor(spec.missing_rate.get(name, 0.0) * n_samples + 1e-9))
        for r in perm[:n_missing]:
            rows[r][4][name] = None

    samples = tuple(
        SampleRecord(patient_id=p, sample_id=s, values=v, severity=sev, outcome=out)
        for p, s, sev, out, v in rows
    )
    return Cohort(schema, samples)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _parse_label(raw: str, column: str, line: int) -> int:
    try:
        value = float(raw)
    except ValueError:
        raise CohortError(f"line {line}: non-numeric {column} label {raw!r}") from None
    if value not in (0.0, 1.0):
        raise CohortError(f"line {line}: {column} label {raw!r} outside {{0,1}}")
    return int(value)


def load_cohort_csv(path: str | Path, schema: FeatureSchema) -> Cohort:
    """Read a cohort CSV. Leading lines starting with ``#`` are skipped."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        lines = fh.readlines()
    start = 0
    while start < len(lines) and lines[start].startswith("#"):
        start += 1
    reader = csv.reader(lines[start:])
    try:
        header = next(reader)
    except StopIteration:
        raise CohortError(f"{path}: missing header row") from None
    header = [h.strip() for h in header]
    needed = list(REQUIRED_COLUMNS) + schema.names
    absent = [c for c in needed if c not in header]
    if absent:
        raise CohortError(f"{path}: missing required column(s) {absent}")
    col = {h: i for i, h in enumerate(header)}
    samples = []
    for lineno, row in enumerate(reader, start=start + 2):
        if not row:
            continue
        values: dict[str, float | None] = {}
        for name in schema.names:
            cell = row[col[name]].strip()
            if cell == "":
                values[name] = None
                continue
            try:
                values[name] = float(cell)
            except ValueError:
                raise CohortError(f"line {lineno}: non-numeric value {cell!r} in column {name}") from None
        samples.append(
            SampleRecord(
                patient_id=row[col["patient_id"]],
                sample_id=row[col["sample_id"]],
                values=values,
                severity=_parse_label(row[col["severity"]], "severity", lineno),
                outcome=_parse_label(row[col["outcome"]], "outcome", lineno),
            )
        )
    return Cohort(schema, tuple(samples))


def save_cohort_csv(cohort: Cohort, path: str | Path, comment: str | None = None) -> None:
    """Write ``cohort`` as CSV; missing values become empty cells."""
    path = Path(path)
    names = cohort.schema.names
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(list(REQUIRED_COLUMNS) + names)
            for s in cohort.samples:
                cells = [s.patient_id, s.sample_id, str(s.severity), str(s.outcome)]
                for n in names:
                    v = s.values.get(n)
                    cells.append("" if v is None else format_number(v))
                writer.writerow(cells)
    except OSError as exc:
        raise CohortError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Summary
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CohortSummary:
    n_patients: int
    n_samples: int
    severe_rate: float
    death_rate: float
    missing_fraction: dict[str, float]
    age_mean: float | None
    age_sd: float | None
    male_rate: float | None

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def cohort_summary(cohort: Cohort) -> CohortSummary:
    """Descriptive statistics: label rates per patient, missingness per sample."""
    if not cohort.samples:
        raise CohortError("cannot summarize an empty cohort")
    labels = cohort.patient_labels()
    n_pat = len(labels)
    severe = sum(s for s, _ in labels.values())
    death = sum(o for _, o in labels.values())
    matrix = cohort.matrix()
    missing = {n: float(np.isnan(matrix[:, j]).mean()) for j, n in enumerate(cohort.schema.names)}

    def per_patient(name: str) -> np.ndarray | None:
        if name not in cohort.schema:
            return None
        first: dict[str, float] = {}
        for s in cohort.samples:
            v = s.values.get(name)
            if v is not None and s.patient_id not in first:
                first[s.patient_id] = v
        return np.array(list(first.values())) if first else None

    ages = per_patient("Age")
    sex = per_patient("Sex")
    return CohortSummary(
        n_patients=n_pat,
        n_samples=len(cohort),
        severe_rate=severe / n_pat,
        death_rate=death / n_pat,
        missing_fraction=missing,
        age_mean=float(ages.mean()) if ages is not None else None,
        age_sd=float(ages.std(ddof=1)) if ages is not None and len(ages) > 1 else None,
        male_rate=float(sex.mean()) if sex is not None else None,
    )
