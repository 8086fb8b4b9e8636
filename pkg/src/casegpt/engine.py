"""Orchestration: one object owning the store, encoder, index, and backends.

The CLI and the HTTP service both drive a :class:`CaseEngine`, so a search
issued over HTTP and one issued at the shell run the identical code path.
Writes (ingest, index builds, upserts) are serialized behind one lock to
honor the single-writer contracts of the store and the index; searches and
insight requests run concurrently.
"""

from __future__ import annotations

import logging
import threading
from datetime import date
from pathlib import Path
from typing import Any

from .config import ServiceConfig
from .corpus import CaseDocument, CaseStore, normalize_text
from .encoder import EncoderBackend, HashEncoder, RemoteEncoder
from .errors import ConfigError
from .evalkit import BenchmarkReport, JudgmentSet, generate_queryset, run_benchmark
from .generation import (
    ExtractiveBackend,
    GenerationBackend,
    RemoteGenerator,
    ScriptedBackend,
)
from .hnsw import HnswIndex
from .insights import InsightReport, generate_insights
from .kernels import get_kernels
from .ranking import RerankWeights, RetrievalOutcome, retrieve_cases

logger = logging.getLogger(__name__)


def _build_encoder(config: ServiceConfig) -> EncoderBackend:
    enc = config.encoder
    if enc.backend == "hash":
        return HashEncoder(dim=enc.dim)
    if enc.backend == "remote":
        if not enc.endpoint:
            raise ConfigError("remote encoder requires encoder.endpoint")
        return RemoteEncoder(
            endpoint=enc.endpoint,
            model=enc.model,
            dim=enc.dim,
            auth_token=enc.auth_token or None,
            timeout=enc.timeout_s,
            max_retries=enc.max_retries,
            max_in_flight=enc.max_in_flight,
            batch_size=enc.batch_size,
        )
    raise ConfigError(f"unknown encoder backend {enc.backend!r}")


def _build_generator(config: ServiceConfig) -> GenerationBackend:
    gen = config.generation
    if gen.backend == "extractive":
        return ExtractiveBackend()
    if gen.backend == "scripted":
        if not gen.script_path:
            raise ConfigError("scripted generation requires generation.script_path")
        return ScriptedBackend.from_file(gen.script_path)
    if gen.backend == "remote":
        if not gen.endpoint:
            raise ConfigError("remote generation requires generation.endpoint")
        return RemoteGenerator(
            endpoint=gen.endpoint,
            model=gen.model,
            auth_token=gen.auth_token or None,
            timeout=gen.timeout_s,
            max_retries=gen.max_retries,
        )
    raise ConfigError(f"unknown generation backend {gen.backend!r}")


def document_text(doc: CaseDocument) -> str:
    """The text that gets embedded for a document: title plus body."""
    if doc.title:
        return normalize_text(f"{doc.title}. {doc.body}")
    return doc.body


class CaseEngine:
    """Configured pipeline instance."""

    def __init__(
        self,
        config: ServiceConfig | None = None,
        encoder: EncoderBackend | None = None,
        generator: GenerationBackend | None = None,
    ):
        self.config = config or ServiceConfig()
        self.kernels = get_kernels(
            None if self.config.kernels == "auto" else self.config.kernels
        )
        self.store = CaseStore(self.config.store_path)
        self.encoder = encoder or _build_encoder(self.config)
        self.generator = generator or _build_generator(self.config)
        self.index = HnswIndex(
            self.encoder.dim, self.config.hnsw.to_params(), kernels=self.kernels
        )
        self._write_lock = threading.RLock()
        if self.config.index_path and Path(self.config.index_path).exists():
            self.load_index(self.config.index_path)

    # -- corpus and index lifecycle ---------------------------------------

    def ingest(self, corpus_path: str, mode: str = "insert") -> int:
        """Load a corpus file into the store (documents only; see
        :meth:`build_index` for embedding)."""
        with self._write_lock:
            return self.store.ingest_file(corpus_path, mode=mode)

    def build_index(self, save: bool = True) -> int:
        """Embed and index every document not yet live in the index, and
        re-embed documents whose stored vectors went stale. Returns the
        number of (re)indexed documents."""
        with self._write_lock:
            stale = set(self.store.stale_ids())
            pending: list[str] = []
            for case_id in self.store.ids():
                if case_id in stale or case_id not in self.index:
                    pending.append(case_id)
            for case_id in pending:
                doc = self.store.get(case_id)
                vector = self.encoder.encode(document_text(doc))
                if case_id in self.index:
                    self.index.tombstone(case_id)
                self.index.insert(case_id, vector)
            self.store.mark_fresh(pending)
            if save and self.config.index_path:
                self.index.save_snapshot(self.config.index_path)
            return len(pending)

    def compact(self, save: bool = True) -> int:
        """Rebuild the index without tombstones; returns live node count."""
        with self._write_lock:
            self.index = self.index.compacted()
            if save and self.config.index_path:
                self.index.save_snapshot(self.config.index_path)
            return self.index.size

    def load_index(self, path: str) -> None:
        with self._write_lock:
            index = HnswIndex.load_snapshot(path, kernels=self.kernels)
            if index.dim != self.encoder.dim:
                raise ConfigError(
                    f"snapshot dim {index.dim} does not match encoder dim {self.encoder.dim}"
                )
            self.index = index

    def add_case(self, doc: CaseDocument, mode: str = "insert") -> None:
        """Store and immediately index one document, so a search issued right
        after the acknowledgment can retrieve it."""
        with self._write_lock:
            self.store.put(doc, mode=mode)
            vector = self.encoder.encode(document_text(doc))
            if doc.id in self.index:
                self.index.tombstone(doc.id)
            self.index.insert(doc.id, vector)
            self.store.mark_fresh([doc.id])

    # -- queries -----------------------------------------------------------

    def search(
        self,
        query: str,
        k: int | None = None,
        n: int | None = None,
        mmr_lambda: float | None = None,
        jurisdiction: str | None = None,
        now: date | None = None,
        weights: "RerankWeights | None" = None,
    ) -> RetrievalOutcome:
        opts = self.config.retrieval.to_options(
            k=k,
            n=n,
            mmr_lambda=mmr_lambda,
            query_jurisdiction=jurisdiction,
            now=now,
            weights=weights,
        )
        return retrieve_cases(query, opts, self.index, self.store, self.encoder)

    def insight(
        self,
        query: str,
        k: int | None = None,
        n: int | None = None,
        mmr_lambda: float | None = None,
        jurisdiction: str | None = None,
        now: date | None = None,
        weights: "RerankWeights | None" = None,
        **insight_overrides: Any,
    ) -> InsightReport:
        retrieval_opts = self.config.retrieval.to_options(
            k=k,
            n=n,
            mmr_lambda=mmr_lambda,
            query_jurisdiction=jurisdiction,
            now=now,
            weights=weights,
        )
        insight_opts = self.config.insight.to_options(**insight_overrides)
        return generate_insights(
            query,
            retrieval_opts,
            insight_opts,
            self.index,
            self.store,
            self.encoder,
            self.generator,
        )

    def evaluate(
        self, n_queries: int, k: int, seed: int, queryset: JudgmentSet | None = None
    ) -> BenchmarkReport:
        """Benchmark retrieval over a (generated or supplied) judgment set.

        The query's source document is excluded from its searchable pool:
        one extra candidate is retrieved and the source filtered out.
        """
        judged = queryset or generate_queryset(self.store, n_queries, seed)

        def search_fn(query_text: str, depth: int, exclude_id: str | None) -> list[str]:
            outcome = self.search(query_text, k=max(self.config.retrieval.k, depth + 1),
                                  n=depth + 1)
            ranked = [r.id for r in outcome.results if r.id != exclude_id]
            return ranked[:depth]

        return run_benchmark(
            judged,
            search_fn,
            k,
            config={
                "k": k,
                "seed": seed,
                "queries": len(judged),
                "encoder": self.encoder.name,
                "kernels": self.kernels.name,
            },
        )

    # -- introspection -----------------------------------------------------

    def status(self) -> dict:
        corpus = self.store.stats()
        index = self.index.stats()
        degraded = index.live_count == 0 or index.live_count < corpus.doc_count
        return {
            "status": "degraded" if degraded else "ok",
            "corpus": {
                "doc_count": corpus.doc_count,
                "max_citation_count": corpus.max_citation_count,
                "jurisdictions": sorted(corpus.jurisdiction_set),
                "domain_counts": dict(sorted(corpus.domain_counts.items())),
            },
            "index": {
                "live_count": index.live_count,
                "node_count": index.node_count,
                "tombstone_count": index.tombstone_count,
                "max_layer": index.max_layer,
                "dim": index.dim,
            },
            "encoder": self.encoder.name,
            "generator": self.generator.name,
            "kernels": self.kernels.name,
        }

    def close(self) -> None:
        self.store.close()
        for backend in (self.encoder, self.generator):
            close = getattr(backend, "close", None)
            if callable(close):
                close()
