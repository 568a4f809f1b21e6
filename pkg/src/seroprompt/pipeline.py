"""Staged experiment pipeline with on-disk artifacts.

Each stage reads its inputs from the run directory, writes its outputs
there, and stamps every artifact with the config hash and seed. The run
directory name is derived from the resolved config, so re-running a stage
with the same config overwrites its artifacts with identical bytes.

Stages: generate -> preprocess -> select -> train_baselines -> train_seq
-> evaluate -> report. ``missing_experiment`` is a standalone study of
accuracy loss as missingness rises.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from . import learners
from .cohort import (
    Cohort,
    CohortSpec,
    FeatureSchema,
    cohort_summary,
    generate_cohort,
    load_cohort_csv,
    save_cohort_csv,
)
from .learners import AdaBoostConfig, GbdtConfig, KnnConfig, RandomForestConfig, TARGETS
from .metrics import MetricsReport, format_table, full_report, write_confusion_csv
from .preprocess import (
    ImputeModel,
    PreprocessConfig,
    apply_impute,
    drop_high_missing_features,
    fit_impute,
    patient_split,
)
from .promptify import (
    BinningModel,
    LabelPair,
    Vocabulary,
    encode_cohort,
    export_prompts_jsonl,
    fit_binning,
    serialize_prompt,
    tokenize,
)
from .seqmodel import SeqModelConfig, decode_batch, load_checkpoint, save_checkpoint, train_seqmodel

log = logging.getLogger(__name__)

BASELINES = ("adaboost", "gbdt", "random_forest", "knn")
BASELINE_TITLES = {"adaboost": "AdaBoost", "gbdt": "GradientBoost", "random_forest": "RandomForest", "knn": "KNN"}
SEQ_ARMS = ("seqmodel-unconstrained", "seqmodel-constrained")


class ConfigError(ValueError):
    pass


class MissingArtifactError(RuntimeError):
    def __init__(self, stage: str, path: Path):
        super().__init__(f"missing artifact {path.name}: run the '{stage}' stage first")
        self.stage = stage
        self.path = path


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CohortSource:
    source: str = "synthetic"
    csv_path: str | None = None
    spec: CohortSpec = field(default_factory=CohortSpec)


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    output_dir: str = "runs"
    top_k: int = 5
    cohort: CohortSource = field(default_factory=CohortSource)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    selection: GbdtConfig = field(default_factory=GbdtConfig)
    baselines: Mapping[str, Any] = field(default_factory=lambda: {
        "adaboost": AdaBoostConfig(),
        "gbdt": GbdtConfig(),
        "random_forest": RandomForestConfig(),
        "knn": KnnConfig(),
    })
    n_bins: int = 16
    seqmodel: SeqModelConfig = field(default_factory=lambda: SeqModelConfig(dropout=0.1))
    missing_experiment: Mapping[str, Any] = field(default_factory=lambda: {"low_rate": 0.10, "high_rate": 0.40})

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "top_k": self.top_k,
            "cohort": {
                "source": self.cohort.source,
                "csv_path": self.cohort.csv_path,
                "spec": self.cohort.spec.to_dict(),
            },
            "preprocess": asdict(self.preprocess),
            "selection": asdict(self.selection),
            "baselines": {k: asdict(v) for k, v in sorted(self.baselines.items())},
            "n_bins": self.n_bins,
            "seqmodel": asdict(self.seqmodel),
            "missing_experiment": dict(self.missing_experiment),
        }

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    @property
    def run_dir(self) -> Path:
        return Path(self.output_dir) / f"run-{self.config_hash[:12]}-seed{self.seed}"

    @property
    def meta(self) -> dict[str, Any]:
        return {"config_hash": self.config_hash, "seed": self.seed}

    @property
    def stamp(self) -> str:
        return f"config_hash={self.config_hash} seed={self.seed}"



def _section(cls, data: Mapping[str, Any] | None, seed: int, name: str, **defaults):
    data = dict(data or {})
    data.pop("rng_seed", None)
    try:
        return cls(**{**defaults, **data, "rng_seed": seed})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def build_config(raw: Mapping[str, Any] | None, output_dir: str | None = None, seed: int | None = None) -> PipelineConfig:
    """Resolve a plain mapping into a validated config; one seed drives every component."""
    raw = dict(raw or {})
    allowed = {"seed", "output_dir", "top_k", "cohort", "preprocess", "selection", "baselines", "n_bins",
               "seqmodel", "missing_experiment"}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    if seed is not None:
        raw["seed"] = seed
    s = int(raw.get("seed", 0))
    top_k = int(raw.get("top_k", 5))
    if top_k < 1:
        raise ConfigError("top_k must be >= 1")
    cohort_raw = dict(raw.get("cohort") or {})
    source = cohort_raw.get("source", "synthetic")
    if source not in ("synthetic", "csv"):
        raise ConfigError(f"cohort.source must be synthetic or csv, got {source!r}")
    spec_raw = dict(cohort_raw.get("spec") or {})
    spec_raw["rng_seed"] = s
    try:
        spec = CohortSpec.from_dict(spec_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cohort.spec: {exc}") from exc
    unknown = sorted(set(cohort_raw) - {"source", "csv_path", "spec"})
    if unknown:
        raise ConfigError(f"unknown cohort keys: {unknown}")
    cohort = CohortSource(source=source, csv_path=cohort_raw.get("csv_path"), spec=spec)
    if source == "csv" and not cohort.csv_path:
        raise ConfigError("cohort.csv_path is required when cohort.source is csv")

    def plain(cls, data, name, **extra):
        data = dict(data or {})
        try:
            return cls(**{**extra, **data})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name}: {exc}") from exc

    baseline_raw = dict(raw.get("baselines") or {})
    unknown = sorted(set(baseline_raw) - set(BASELINES))
    if unknown:
        raise ConfigError(f"unknown baselines: {unknown}")
    baselines = {
        "adaboost": _section(AdaBoostConfig, baseline_raw.get("adaboost"), s, "baselines.adaboost"),
        "gbdt": _section(GbdtConfig, baseline_raw.get("gbdt"), s, "baselines.gbdt"),
        "random_forest": _section(RandomForestConfig, baseline_raw.get("random_forest"), s, "baselines.random_forest"),
        "knn": plain(KnnConfig, baseline_raw.get("knn"), "baselines.knn"),
    }
    seq_raw = dict(raw.get("seqmodel") or {})
    seq_raw.setdefault("dropout", 0.1)
    miss = {"low_rate": 0.10, "high_rate": 0.40, **dict(raw.get("missing_experiment") or {})}
    return PipelineConfig(
        seed=s,
        output_dir=str(output_dir if output_dir is not None else raw.get("output_dir", "runs")),
        top_k=top_k,
        cohort=cohort,
        preprocess=_section(PreprocessConfig, raw.get("preprocess"), s, "preprocess"),
        selection=_section(GbdtConfig, raw.get("selection"), s, "selection"),
        baselines=baselines,
        n_bins=int(raw.get("n_bins", 16)),
        seqmodel=_section(SeqModelConfig, seq_raw, s, "seqmodel"),
        missing_experiment=miss,
    )


def load_config(path: str | Path | None, output_dir: str | None = None, seed: int | None = None) -> PipelineConfig:
    raw: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    return build_config(raw, output_dir=output_dir, seed=seed)


# ---------------------------------------------------------------------------
# Artifact helpers
# ---------------------------------------------------------------------------


class Run:
    """Paths and stamped I/O for one run directory."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.dir = config.run_dir

    def path(self, name: str) -> Path:
        return self.dir / name

    def need(self, name: str, stage: str) -> Path:
        p = self.path(name)
        if not p.exists():
            raise MissingArtifactError(stage, p)
        return p

    def write_json(self, name: str, payload: Mapping[str, Any]) -> Path:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        body = {"meta": self.config.meta, **payload}
        p.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return p

    def read_json(self, name: str, stage: str) -> dict[str, Any]:
        return json.loads(self.need(name, stage).read_text(encoding="utf-8"))

    def write_csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        with p.open("w", newline="", encoding="utf-8") as fh:
            fh.write(f"# {self.config.stamp}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        return p

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(f"# {self.config.stamp}\n{text}", encoding="utf-8")
        return p


def _fmt(x: float) -> str:
    return repr(float(x))


def _schema_from(data: Sequence[Mapping[str, Any]]) -> FeatureSchema:
    return FeatureSchema.from_dict(data)


def _load_split(run: Run, stage: str) -> tuple[Cohort, Cohort, FeatureSchema]:
    schema = _schema_from(run.read_json("schema.json", "preprocess")["features"])
    train = load_cohort_csv(run.need("train.csv", stage), schema)
    test = load_cohort_csv(run.need("test.csv", stage), schema)
    return train, test, schema


def _selected_schema(run: Run, schema: FeatureSchema) -> FeatureSchema:
    names = run.read_json("selected_features.json", "select")["features"]
    return schema.subset(names)


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_generate(config: PipelineConfig) -> Path:
    run = Run(config)
    run.dir.mkdir(parents=True, exist_ok=True)
    if config.cohort.source == "csv":
        src = Path(config.cohort.csv_path)
        if not src.exists():
            raise ConfigError(f"cohort CSV not found: {src}")
        cohort = load_cohort_csv(src, config.cohort.spec.schema)
    else:
        cohort = generate_cohort(config.cohort.spec)
    save_cohort_csv(cohort, run.path("cohort.csv"), comment=config.stamp)
    run.write_json("cohort_summary.json", {"summary": cohort_summary(cohort).to_dict(), "schema": cohort.schema.to_dict()})
    log.info("generate: %d patients, %d samples", len(cohort.patient_ids), len(cohort))
    return run.dir


def stage_preprocess(config: PipelineConfig) -> Path:
    run = Run(config)
    schema = _schema_from(run.read_json("cohort_summary.json", "generate")["schema"])
    cohort = load_cohort_csv(run.need("cohort.csv", "generate"), schema)
    pc = config.preprocess
    filtered, dropped = drop_high_missing_features(cohort, pc.missing_threshold)
    split = patient_split(filtered, pc.split_ratio, pc.rng_seed)
    impute = fit_impute(split.train, pc.impute_strategy)
    run.write_json("dropped_features.json", {"threshold": pc.missing_threshold, "dropped": dropped})
    run.write_json("schema.json", {"features": filtered.schema.to_dict()})
    run.write_json("split.json", {
        "ratio": pc.split_ratio,
        "train_patient_ids": sorted(split.train_patient_ids),
        "test_patient_ids": sorted(split.test_patient_ids),
        "n_train_samples": len(split.train),
        "n_test_samples": len(split.test),
    })
    run.write_json("impute.json", impute.to_dict())
    save_cohort_csv(split.train, run.path("train.csv"), comment=config.stamp)
    save_cohort_csv(split.test, run.path("test.csv"), comment=config.stamp)
    log.info("preprocess: dropped %s; %d/%d patients", dropped, len(split.train_patient_ids), len(split.test_patient_ids))
    return run.dir


def stage_select(config: PipelineConfig) -> Path:
    run = Run(config)
    train, _, schema = _load_split(run, "select")
    impute = ImputeModel.from_dict(run.read_json("impute.json", "preprocess"))
    rankings = learners.rank_features(apply_impute(impute, train), config.selection)
    for target, ranking in rankings.items():
        scores = ranking.as_dict()
        run.write_csv(f"importance_{target}.csv", ["feature", "importance"],
                      [[n, _fmt(scores[n])] for n in ranking.order])
    selected = learners.union_top_k(rankings, config.top_k)
    if not selected:
        raise RuntimeError("feature selection produced an empty feature set")
    run.write_json("selected_features.json", {
        "top_k": config.top_k,
        "features": selected,
        "top_k_by_target": {t: r.top_k(config.top_k) for t, r in rankings.items()},
    })
    log.info("select: %s", selected)
    return run.dir


def stage_train_baselines(config: PipelineConfig) -> Path:
    run = Run(config)
    train, _, schema = _load_split(run, "train-baselines")
    sel = _selected_schema(run, schema)
    impute = ImputeModel.from_dict(run.read_json("impute.json", "preprocess"))
    dense = apply_impute(impute, train.with_schema(sel))
    X = dense.matrix()
    (run.dir / "models").mkdir(exist_ok=True)
    for kind in BASELINES:
        for target in TARGETS:
            model = learners.fit_learner(kind, X, dense.labels(target), config.baselines[kind])
            learners.save_model(model, run.path(f"models/{kind}_{target}.json"),
                                meta={**config.meta, "features": sel.names, "target": target})
    log.info("train-baselines: %d models", len(BASELINES) * len(TARGETS))
    return run.dir


def _examples(cohort: Cohort, binning: BinningModel, vocab: Vocabulary):
    out = []
    for s in cohort.samples:
        pair = LabelPair.unchecked("severe" if s.severity else "mild", "death" if s.outcome else "survive")
        out.append((tokenize(serialize_prompt(s, cohort.schema), binning, vocab, pair), pair))
    return out


def stage_train_seq(config: PipelineConfig) -> Path:
    run = Run(config)
    train, test, schema = _load_split(run, "train-seq")
    sel = _selected_schema(run, schema)
    train, test = train.with_schema(sel), test.with_schema(sel)
    binning = fit_binning(train, config.n_bins)
    vocab = Vocabulary.build(sel, binning)
    run.write_json("binning.json", {"binning": binning.to_dict(), "features": sel.to_dict()})
    vocab_path = run.path("vocab.csv")
    vocab.save_csv(vocab_path)
    vocab_path.write_text(f"# {config.stamp}\n" + vocab_path.read_text(encoding="utf-8"), encoding="utf-8")
    export_prompts_jsonl(train, run.path("prompts_train.jsonl"), extra=config.meta)
    export_prompts_jsonl(test, run.path("prompts_test.jsonl"), extra=config.meta)
    model = train_seqmodel(_examples(train, binning, vocab), vocab, config.seqmodel,
                           groups=[s.patient_id for s in train.samples])
    save_checkpoint(model, run.path("seqmodel.pt"), meta=config.meta)
    run.write_csv("loss_curve.csv", ["epoch", "train_loss"], [[i, _fmt(v)] for i, v in enumerate(model.loss_curve)])
    log.info("train-seq: loss %.4f -> %.4f", model.loss_curve[0], model.loss_curve[-1])
    return run.dir


def _joint_counts(sev: np.ndarray, out: np.ndarray, y_sev: np.ndarray, y_out: np.ndarray) -> dict[str, Any]:
    return {
        "mild_and_death": int(np.sum((sev == 0) & (out == 1))),
        "joint_accuracy": float(np.mean((sev == y_sev) & (out == y_out))),
        "n": int(len(sev)),
    }


def predict_test(config: PipelineConfig) -> dict[str, Any]:
    """Predictions of every arm on the test split (no files written)."""
    run = Run(config)
    _, test, schema = _load_split(run, "evaluate")
    sel = _selected_schema(run, schema)
    test = test.with_schema(sel)
    impute = ImputeModel.from_dict(run.read_json("impute.json", "preprocess"))
    X = apply_impute(impute, test).matrix()
    preds: dict[str, dict[str, np.ndarray]] = {}
    for kind in BASELINES:
        preds[kind] = {}
        for target in TARGETS:
            model = learners.load_model(run.need(f"models/{kind}_{target}.json", "train-baselines"))
            preds[kind][target] = np.asarray(learners.predict(model, X))
    model = load_checkpoint(run.need("seqmodel.pt", "train-seq"))
    binning = BinningModel.from_dict(run.read_json("binning.json", "train-seq")["binning"])
    ids, _ = encode_cohort(test, binning, model.vocab)
    for arm, constrained in (("seqmodel-unconstrained", False), ("seqmodel-constrained", True)):
        res = decode_batch(model, ids, constrained=constrained)
        preds[arm] = {
            "severity": np.array([r.label.severity_bit for r in res], dtype=np.int64),
            "outcome": np.array([r.label.outcome_bit for r in res], dtype=np.int64),
        }
    return {"test": test, "preds": preds}


def stage_evaluate(config: PipelineConfig) -> Path:
    run = Run(config)
    out = predict_test(config)
    test: Cohort = out["test"]
    preds = out["preds"]
    y = {t: test.labels(t) for t in TARGETS}
    metrics: dict[str, Any] = {}
    for target in TARGETS:
        reports = {arm: full_report(y[target], p[target]) for arm, p in preds.items()}
        metrics[target] = {arm: r.to_dict() for arm, r in reports.items()}
        write_confusion_csv(run.path(f"confusion_{target}.csv"), reports, comment=config.stamp)
    ablation = {
        "baselines": {k: _joint_counts(preds[k]["severity"], preds[k]["outcome"], y["severity"], y["outcome"]) for k in BASELINES},
        **{arm: _joint_counts(preds[arm]["severity"], preds[arm]["outcome"], y["severity"], y["outcome"]) for arm in SEQ_ARMS},
    }
    run.write_json("metrics.json", {"n_test_samples": len(test), "metrics": metrics})
    run.write_json("ablation.json", {"arms": ablation})
    rows = []
    for i, s in enumerate(test.samples):
        rows.append([s.sample_id, s.severity, s.outcome] + [int(preds[a][t][i]) for a in preds for t in TARGETS])
    run.write_csv("predictions.csv", ["sample_id", "severity", "outcome"] + [f"{a}:{t}" for a in preds for t in TARGETS], rows)
    log.info("evaluate: %d test samples", len(test))
    return run.dir


def _report_from_dict(d: Mapping[str, Any]) -> MetricsReport:
    from .metrics import ClassRow

    rows = {int(c): ClassRow(v["precision"], v["recall"], v["f1"], v["support"], tuple(v["degenerate"]))
            for c, v in d["classes"].items()}
    cm = tuple(tuple(r) for r in d["confusion_matrix"])
    return MetricsReport(accuracy=d["accuracy"], rows=rows, confusion_matrix=cm)


def stage_report(config: PipelineConfig) -> Path:
    run = Run(config)
    metrics = run.read_json("metrics.json", "evaluate")["metrics"]
    ablation = run.read_json("ablation.json", "evaluate")["arms"]
    selected = run.read_json("selected_features.json", "select")
    dropped = run.read_json("dropped_features.json", "preprocess")
    summary = run.read_json("cohort_summary.json", "generate")["summary"]
    names = {**BASELINE_TITLES, "seqmodel-unconstrained": "SeqModel (unconstrained)",
             "seqmodel-constrained": "SeqModel (constrained)"}
    parts = [
        f"Cohort: {summary['n_patients']} patients, {summary['n_samples']} samples, "
        f"severe {summary['severe_rate']:.4f}, death {summary['death_rate']:.4f}",
        f"Dropped features (> {dropped['threshold']} missing): {', '.join(dropped['dropped']) or 'none'}",
        f"Selected features: {', '.join(selected['features'])}",
        "",
    ]
    for target in TARGETS:
        reports = {names[a]: _report_from_dict(metrics[target][a]) for a in BASELINES + SEQ_ARMS}
        parts.append(format_table(f"{target.capitalize()} prediction", reports))
    parts.append("Ablation: (mild, death) predictions / joint accuracy")
    for k in BASELINES:
        v = ablation["baselines"][k]
        parts.append(f"  {names[k]:<28}{v['mild_and_death']:>6}  {v['joint_accuracy']:.4f}")
    for arm in SEQ_ARMS:
        v = ablation[arm]
        parts.append(f"  {names[arm]:<28}{v['mild_and_death']:>6}  {v['joint_accuracy']:.4f}")
    run.write_text("report.txt", "\n".join(parts) + "\n")
    run.write_json("report.json", {
        "selected_features": selected["features"],
        "dropped_features": dropped["dropped"],
        "accuracy": {t: {a: m["accuracy"] for a, m in metrics[t].items()} for t in TARGETS},
        "ablation": ablation,
    })
    return run.dir


STAGES = {
    "generate": stage_generate,
    "preprocess": stage_preprocess,
    "select": stage_select,
    "train-baselines": stage_train_baselines,
    "train-seq": stage_train_seq,
    "evaluate": stage_evaluate,
    "report": stage_report,
}


def run_all(config: PipelineConfig) -> Path:
    for stage in STAGES.values():
        stage(config)
    return config.run_dir


# ---------------------------------------------------------------------------
# Missing-value experiment
# ---------------------------------------------------------------------------


def _accuracy(y: np.ndarray, p: np.ndarray) -> float:
    return float(np.mean(y == p))


def evaluate_at_missing_rate(config: PipelineConfig, rate: float, features: Sequence[str]) -> dict[str, float]:
    """Train mean-imputed GBDT and the sequence model at one MCAR rate on ``features``.

    The missingness filter is skipped so that the high-rate features stay in.
    """
    spec = config.cohort.spec
    missing = dict(spec.missing_rate)
    missing.update({f: rate for f in features})
    cohort = generate_cohort(replace(spec, missing_rate=missing))
    split = patient_split(cohort, config.preprocess.split_ratio, config.preprocess.rng_seed)
    impute = fit_impute(split.train, "mean")
    Xtr = apply_impute(impute, split.train).matrix()
    Xte = apply_impute(impute, split.test).matrix()
    out: dict[str, float] = {}
    hits = np.ones(len(split.test), dtype=bool)
    for target in TARGETS:
        model = learners.fit_gbdt(Xtr, split.train.labels(target), config.baselines["gbdt"])
        pred = model.predict(Xte)
        out[f"gbdt_{target}"] = _accuracy(split.test.labels(target), pred)
        hits &= pred == split.test.labels(target)
    out["gbdt_joint"] = float(np.mean(hits))
    binning = fit_binning(split.train, config.n_bins)
    vocab = Vocabulary.build(cohort.schema, binning)
    model = train_seqmodel(_examples(split.train, binning, vocab), vocab, config.seqmodel,
                           groups=[s.patient_id for s in split.train.samples])
    ids, _ = encode_cohort(split.test, binning, vocab)
    res = decode_batch(model, ids, constrained=True)
    sev = np.array([r.label.severity_bit for r in res])
    outc = np.array([r.label.outcome_bit for r in res])
    out["seqmodel_severity"] = _accuracy(split.test.labels("severity"), sev)
    out["seqmodel_outcome"] = _accuracy(split.test.labels("outcome"), outc)
    out["seqmodel_joint"] = float(np.mean((sev == split.test.labels("severity")) & (outc == split.test.labels("outcome"))))
    return out


def missing_experiment(config: PipelineConfig) -> Path:
    """Accuracy drop (percentage points) from the low to the high missing rate
    on the informative (non-zero effect) features, for both model families."""
    run = Run(config)
    spec = config.cohort.spec
    informative = sorted({n for ws in spec.effect_weights.values() for n, w in ws.items() if w != 0},
                         key=spec.schema.names.index)
    low, high = float(config.missing_experiment["low_rate"]), float(config.missing_experiment["high_rate"])
    acc_low = evaluate_at_missing_rate(config, low, informative)
    acc_high = evaluate_at_missing_rate(config, high, informative)
    degradation = {k: 100.0 * (acc_low[k] - acc_high[k]) for k in acc_low}
    run.write_json("missing_experiment.json", {
        "informative_features": informative,
        "low_rate": low,
        "high_rate": high,
        "accuracy_low": acc_low,
        "accuracy_high": acc_high,
        "degradation_points": degradation,
    })
    return run.dir
