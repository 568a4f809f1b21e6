"""Read-only HTTP scoring over a finished run directory.

The :class:`Predictor` holds the loaded artifacts and is what the endpoints
call, so library and HTTP predictions are the same computation. Records
are scored one at a time: a result never depends on what else was in the
batch.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Any, Mapping, Optional, Sequence

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from . import learners
from .cohort import Cohort, FeatureSchema
from .pipeline import BASELINES, MissingArtifactError
from .preprocess import ImputeModel, apply_impute
from .promptify import BinningModel, record_from_values, tokens_for_records
from .seqmodel import decode_batch, load_checkpoint

SEQ_KIND = "seqmodel"
MAX_BATCH = 10_000

FeatureValue = Optional[Annotated[float, Field(allow_inf_nan=False)]]


class PredictRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    features: dict[str, FeatureValue]


class BatchRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    records: list[dict[str, FeatureValue]] = Field(max_length=MAX_BATCH)


class UnknownFeatureError(ValueError):
    def __init__(self, names: Sequence[str], index: int | None = None):
        super().__init__(f"unknown feature(s): {list(names)}")
        self.names = list(names)
        self.index = index


@dataclass(frozen=True)
class Prediction:
    severity: str
    outcome: str
    severity_probs: dict[str, float]
    outcome_probs: dict[str, float]
    model_id: str
    schema_version: str

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def _read_json(run_dir: Path, name: str, stage: str) -> dict[str, Any]:
    path = run_dir / name
    if not path.exists():
        raise MissingArtifactError(stage, path)
    return json.loads(path.read_text(encoding="utf-8"))


class Predictor:
    """Scores feature mappings with either the sequence model (missing values
    become markers) or a baseline pair (missing values are imputed)."""

    def __init__(self, run_dir: str | Path, model: str = SEQ_KIND):
        self.run_dir = Path(run_dir)
        if model not in (SEQ_KIND, *BASELINES):
            raise ValueError(f"unknown model {model!r}; expected {SEQ_KIND} or one of {list(BASELINES)}")
        self.kind = model
        full = FeatureSchema.from_dict(_read_json(self.run_dir, "schema.json", "preprocess")["features"])
        selected = _read_json(self.run_dir, "selected_features.json", "select")
        self.schema = full.subset(selected["features"])
        self.config_hash = selected["meta"]["config_hash"]
        blob = json.dumps(self.schema.to_dict(), sort_keys=True).encode("utf-8")
        self.schema_version = hashlib.sha256(blob).hexdigest()[:12]
        if model == SEQ_KIND:
            ckpt = self.run_dir / "seqmodel.pt"
            if not ckpt.exists():
                raise MissingArtifactError("train-seq", ckpt)
            self.seq = load_checkpoint(ckpt)
            self.seq.net.eval()
            self.binning = BinningModel.from_dict(_read_json(self.run_dir, "binning.json", "train-seq")["binning"])
            self.model_id = f"seqmodel-constrained+missing-markers:{self.seq.vocab_hash[:12]}"
        else:
            self.impute = ImputeModel.from_dict(_read_json(self.run_dir, "impute.json", "preprocess"))
            self.models = {}
            for target in learners.TARGETS:
                path = self.run_dir / "models" / f"{model}_{target}.json"
                if not path.exists():
                    raise MissingArtifactError("train-baselines", path)
                self.models[target] = learners.load_model(path)
            self.model_id = f"{model}+{self.impute.strategy}-impute:{self.config_hash[:12]}"

    def schema_dict(self) -> dict[str, Any]:
        return {"schema_version": self.schema_version, "features": self.schema.to_dict()}

    def check(self, values: Mapping[str, Any], index: int | None = None) -> None:
        unknown = [k for k in values if k not in self.schema]
        if unknown:
            raise UnknownFeatureError(unknown, index)

    def predict_one(self, values: Mapping[str, float | None]) -> Prediction:
        self.check(values)
        for k, v in values.items():
            if v is not None and not math.isfinite(float(v)):
                raise ValueError(f"{k}: value must be finite")
        record = record_from_values(values, self.schema)
        if self.kind == SEQ_KIND:
            ids = tokens_for_records([record], self.schema, self.binning, self.seq.vocab)
            res = decode_batch(self.seq, ids, constrained=True)[0]
            sev, out = res.label.severity, res.label.outcome
            sp, op = res.severity_probs, res.outcome_probs
        else:
            x = apply_impute(self.impute, Cohort(self.schema, (record,))).matrix()
            bits, probs = {}, {}
            for target, m in self.models.items():
                probs[target] = float(learners.predict_proba(m, x)[0])
                bits[target] = int(learners.predict(m, x)[0])
            sev = "severe" if bits["severity"] else "mild"
            out = "death" if bits["outcome"] else "survive"
            sp = (1.0 - probs["severity"], probs["severity"])
            op = (1.0 - probs["outcome"], probs["outcome"])
        return Prediction(
            severity=sev,
            outcome=out,
            severity_probs={"mild": sp[0], "severe": sp[1]},
            outcome_probs={"survive": op[0], "death": op[1]},
            model_id=self.model_id,
            schema_version=self.schema_version,
        )

    def predict_many(self, records: Sequence[Mapping[str, float | None]]) -> list[Prediction]:
        for i, r in enumerate(records):
            self.check(r, i)
        return [self.predict_one(r) for r in records]


def _unknown_response(exc: UnknownFeatureError, base: tuple) -> JSONResponse:
    loc = base if exc.index is None else base + (exc.index,)
    detail = [{"loc": list(loc) + [n], "msg": "unknown feature", "type": "unknown_feature"} for n in exc.names]
    return JSONResponse(status_code=422, content={"detail": detail})


def create_app(run_dir: str | Path, model: str = SEQ_KIND) -> FastAPI:
    predictor = Predictor(run_dir, model)
    app = FastAPI(title="seroprompt", version="1")
    app.state.predictor = predictor

    @app.exception_handler(RequestValidationError)
    async def _invalid(request: Request, exc: RequestValidationError) -> JSONResponse:
        errors = [{"loc": list(e["loc"]), "msg": e["msg"], "type": e["type"]} for e in exc.errors()]
        return JSONResponse(status_code=422, content={"detail": errors})

    @app.get("/health")
    def health() -> dict[str, Any]:
        return {"status": "ok", "model_id": predictor.model_id, "schema_version": predictor.schema_version}

    @app.get("/schema")
    def schema() -> dict[str, Any]:
        return predictor.schema_dict()

    @app.post("/predict")
    def predict(req: PredictRequest):
        try:
            return predictor.predict_one(req.features).to_dict()
        except UnknownFeatureError as exc:
            return _unknown_response(exc, ("body", "features"))

    @app.post("/predict/batch")
    def predict_batch(req: BatchRequest):
        try:
            preds = predictor.predict_many(req.records)
        except UnknownFeatureError as exc:
            return _unknown_response(exc, ("body", "records"))
        return {"predictions": [p.to_dict() for p in preds]}

    return app


def predict_records(predictor: Predictor, X: np.ndarray) -> list[Prediction]:
    """Score a value matrix (NaN = missing) whose columns follow ``predictor.schema``."""
    names = predictor.schema.names
    rows = [{n: (None if np.isnan(v) else float(v)) for n, v in zip(names, row)} for row in np.asarray(X, dtype=float)]
    return predictor.predict_many(rows)
