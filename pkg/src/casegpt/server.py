"""HTTP service surface: the /v1 API over one shared engine.

Endpoints: ``POST /v1/cases`` (ingest + immediate incremental indexing),
``POST /v1/search``, ``POST /v1/insights``, ``GET /v1/health``,
``GET /v1/stats``. Error responses always carry
``{"error": {"code": <machine-readable>, "message": <human-readable>}}``.

``KNOB_BOUNDS`` is the single source of truth for request-parameter ranges;
the browser console generates its input limits from it, so UI-side clamping
and server-side 422s can never drift apart.
"""

from __future__ import annotations

import json
import threading
from datetime import date

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .corpus import doc_from_dict
from .engine import CaseEngine
from .errors import (
    BackendUnavailable,
    CaseGptError,
    ConfigError,
    CorpusError,
    DuplicateId,
    EmptyIndex,
    EmptyText,
    InvalidCode,
    InvalidParams,
    MalformedRecord,
    MissingField,
    NoCases,
    NotFound,
)
from .insights import ClaimVerdict, InsightReport
from .ranking import RankedResult, RerankWeights

# Parameter bounds shared with the console UI (do not edit one side only).
KNOB_BOUNDS = {
    "k": {"min": 1, "max": 10_000},
    "n": {"min": 1, "max": 1_000},
    "mmr_lambda": {"min": 0.0, "max": 1.0},
    "weight": {"min": 0.0, "max": 1.0},
    "max_rounds": {"min": 0, "max": 10},
    "threshold": {"min": 0.000001, "max": 1.0},
    "token_budget": {"min": 32, "max": 32_768},
}


def knob_bounds_json() -> str:
    return json.dumps(KNOB_BOUNDS, indent=2, sort_keys=True)


class WeightsIn(BaseModel):
    similarity: float = Field(default=0.7, ge=0.0, le=1.0)
    recency: float = Field(default=0.1, ge=0.0, le=1.0)
    citation: float = Field(default=0.1, ge=0.0, le=1.0)
    jurisdiction: float = Field(default=0.1, ge=0.0, le=1.0)


_WEIGHT_FIELD = Field(
    default=None, ge=KNOB_BOUNDS["weight"]["min"], le=KNOB_BOUNDS["weight"]["max"]
)


class SearchRequest(BaseModel):
    query: str = Field(min_length=1)
    k: int | None = Field(
        default=None, ge=KNOB_BOUNDS["k"]["min"], le=KNOB_BOUNDS["k"]["max"]
    )
    n: int | None = Field(
        default=None, ge=KNOB_BOUNDS["n"]["min"], le=KNOB_BOUNDS["n"]["max"]
    )
    mmr_lambda: float | None = Field(
        default=None,
        ge=KNOB_BOUNDS["mmr_lambda"]["min"],
        le=KNOB_BOUNDS["mmr_lambda"]["max"],
    )
    w_similarity: float | None = _WEIGHT_FIELD
    w_recency: float | None = _WEIGHT_FIELD
    w_citation: float | None = _WEIGHT_FIELD
    w_jurisdiction: float | None = _WEIGHT_FIELD
    jurisdiction: str | None = None
    now: date | None = None

    def weights_override(self, defaults) -> "RerankWeights | None":
        """Blend request weights over the configured ones; None if untouched."""
        given = {
            "similarity": self.w_similarity,
            "recency": self.w_recency,
            "citation": self.w_citation,
            "jurisdiction": self.w_jurisdiction,
        }
        if all(v is None for v in given.values()):
            return None
        return RerankWeights(
            similarity=given["similarity"]
            if given["similarity"] is not None
            else defaults.w_similarity,
            recency=given["recency"]
            if given["recency"] is not None
            else defaults.w_recency,
            citation=given["citation"]
            if given["citation"] is not None
            else defaults.w_citation,
            jurisdiction=given["jurisdiction"]
            if given["jurisdiction"] is not None
            else defaults.w_jurisdiction,
            half_life_days=defaults.half_life_days,
        )


class InsightRequest(SearchRequest):
    max_rounds: int | None = Field(
        default=None,
        ge=KNOB_BOUNDS["max_rounds"]["min"],
        le=KNOB_BOUNDS["max_rounds"]["max"],
    )
    threshold: float | None = Field(
        default=None,
        gt=0.0,
        le=KNOB_BOUNDS["threshold"]["max"],
    )
    token_budget: int | None = Field(
        default=None,
        ge=KNOB_BOUNDS["token_budget"]["min"],
        le=KNOB_BOUNDS["token_budget"]["max"],
    )


_ERROR_STATUS: list[tuple[type, int]] = [
    (MissingField, 400),
    (InvalidCode, 400),
    (MalformedRecord, 400),
    (EmptyText, 400),
    (NotFound, 404),
    (DuplicateId, 409),
    (InvalidParams, 422),
    (BackendUnavailable, 503),
    (EmptyIndex, 503),
    (NoCases, 503),
    (CorpusError, 400),
    (ConfigError, 500),
    (CaseGptError, 500),
]


def _status_for(exc: CaseGptError) -> int:
    for cls, status in _ERROR_STATUS:
        if isinstance(exc, cls):
            return status
    return 500


def _error_body(code: str, message: str) -> dict:
    return {"error": {"code": code, "message": message}}


def result_to_dict(result: RankedResult, doc=None) -> dict:
    out = {
        "id": result.id,
        "cosine": result.cosine,
        "factors": dict(result.factors),
        "final_score": result.final_score,
        "rank": result.rank,
    }
    if doc is not None:
        # The console renders titles per row and the selected case's body;
        # with no case-detail route, the result rows carry them.
        out["title"] = doc.title
        out["body"] = doc.body
    return out


def verdict_to_dict(verdict: ClaimVerdict) -> dict:
    return {
        "sentence": verdict.sentence,
        "verified": verdict.verified,
        "best_case_id": verdict.best_case_id,
        "overlap": verdict.overlap,
        "cited_ids": list(verdict.cited_ids),
    }


def report_to_dict(report: InsightReport, docs=None) -> dict:
    docs = docs or {}
    return {
        "text": report.text,
        "citations": list(report.citations),
        "claim_verdicts": [verdict_to_dict(v) for v in report.claim_verdicts],
        "refinement_rounds_used": report.refinement_rounds_used,
        "status": report.status,
        "stripped_sentences": list(report.stripped_sentences),
        "failure_reason": report.failure_reason,
        "retrieval": [
            result_to_dict(r, docs.get(r.id)) for r in (report.retrieval or [])
        ],
        "timings": dict(report.timings or {}),
    }


def create_app(engine: CaseEngine) -> FastAPI:
    app = FastAPI(title="case retrieval service", version=__version__)
    insight_slots = threading.Semaphore(engine.config.server.max_concurrent_insights)

    @app.exception_handler(CaseGptError)
    async def handle_domain_error(request: Request, exc: CaseGptError):
        return JSONResponse(
            status_code=_status_for(exc),
            content=_error_body(exc.code, str(exc)),
        )

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        location = ".".join(str(part) for part in first.get("loc", []) if part != "body")
        message = f"{location}: {first.get('msg', 'invalid request')}" if location else str(exc)
        return JSONResponse(
            status_code=422, content=_error_body("invalid_params", message)
        )

    @app.post("/v1/cases", status_code=201)
    async def add_case(request: Request):
        try:
            raw = await request.json()
        except Exception as exc:
            raise MalformedRecord(f"request body is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise MalformedRecord("request body must be a JSON object")
        mode = raw.pop("mode", "insert")
        if mode not in ("insert", "upsert"):
            raise InvalidParams(f"mode must be insert or upsert, got {mode!r}")
        doc = doc_from_dict(raw)
        engine.add_case(doc, mode=mode)
        return {"id": doc.id, "indexed": True, "doc_count": engine.store.stats().doc_count}

    @app.post("/v1/search")
    def search(body: SearchRequest):
        outcome = engine.search(
            body.query,
            k=body.k,
            n=body.n,
            mmr_lambda=body.mmr_lambda,
            jurisdiction=body.jurisdiction,
            now=body.now,
            weights=body.weights_override(engine.config.retrieval),
        )
        docs = engine.store.get_many([r.id for r in outcome.results])
        return {
            "results": [result_to_dict(r, docs.get(r.id)) for r in outcome.results],
            "timings": outcome.timings,
        }

    @app.post("/v1/insights")
    def insights(body: InsightRequest):
        acquired = insight_slots.acquire(timeout=engine.config.server.request_timeout_s)
        if not acquired:
            raise BackendUnavailable("insight request limit reached; retry later")
        try:
            report = engine.insight(
                body.query,
                k=body.k,
                n=body.n,
                mmr_lambda=body.mmr_lambda,
                jurisdiction=body.jurisdiction,
                now=body.now,
                weights=body.weights_override(engine.config.retrieval),
                max_rounds=body.max_rounds,
                threshold=body.threshold,
                token_budget=body.token_budget,
            )
        finally:
            insight_slots.release()
        docs = engine.store.get_many([r.id for r in (report.retrieval or [])])
        return report_to_dict(report, docs)

    @app.get("/v1/health")
    def health():
        status = engine.status()
        return {
            "status": status["status"],
            "version": __version__,
            "index": status["index"],
            "corpus": {"doc_count": status["corpus"]["doc_count"]},
        }

    @app.get("/v1/stats")
    def stats():
        status = engine.status()
        hnsw = engine.config.hnsw
        return {
            "corpus": status["corpus"],
            "index": status["index"],
            "params": {
                "m": hnsw.m,
                "m0": hnsw.m0 if hnsw.m0 is not None else 2 * hnsw.m,
                "ef_construction": hnsw.ef_construction,
                "ef_search": hnsw.ef_search,
                "rng_seed": hnsw.rng_seed,
            },
            "retrieval_defaults": {
                "k": engine.config.retrieval.k,
                "n": engine.config.retrieval.n,
                "mmr_lambda": engine.config.retrieval.mmr_lambda,
                "w_similarity": engine.config.retrieval.w_similarity,
                "w_recency": engine.config.retrieval.w_recency,
                "w_citation": engine.config.retrieval.w_citation,
                "w_jurisdiction": engine.config.retrieval.w_jurisdiction,
            },
            "bounds": KNOB_BOUNDS,
        }

    return app
