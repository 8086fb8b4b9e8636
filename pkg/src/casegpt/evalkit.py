"""Retrieval evaluation: ranking metrics, judgment sets, synthetic query
generation, and benchmark reports.

Metrics use binary relevance. Per-query values are macro-averaged across the
query set; queries whose relevant documents are never retrieved contribute 0
(conservative) rather than being dropped. Latency is recorded per query and
reported as mean and 95th percentile, retrieval-only.
"""

from __future__ import annotations

import json
import math
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .corpus import CaseStore
from .errors import EmptyJudgment, EmptyQuerySet, InsufficientCorpus, InvalidParams
from .insights import split_sentences

# --------------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------------


def _check_k(k: int) -> None:
    if k < 1:
        raise InvalidParams(f"k must be >= 1, got {k}")


def _check_relevant(relevant: set[str]) -> None:
    if not relevant:
        raise EmptyJudgment("relevant set must not be empty")


def precision_at_k(ranked_ids: Sequence[str], relevant: set[str], k: int) -> float:
    """Fraction of the top-k positions holding relevant documents."""
    _check_k(k)
    _check_relevant(relevant)
    hits = sum(1 for case_id in ranked_ids[:k] if case_id in relevant)
    return hits / k


def recall_at_k(ranked_ids: Sequence[str], relevant: set[str], k: int) -> float:
    """Fraction of relevant documents found in the top k."""
    _check_k(k)
    _check_relevant(relevant)
    hits = sum(1 for case_id in ranked_ids[:k] if case_id in relevant)
    return hits / len(relevant)


def f1_at_k(ranked_ids: Sequence[str], relevant: set[str], k: int) -> float:
    """Harmonic mean of precision and recall at k (0 when both are 0)."""
    p = precision_at_k(ranked_ids, relevant, k)
    r = recall_at_k(ranked_ids, relevant, k)
    if p + r == 0:
        return 0.0
    return 2 * p * r / (p + r)


def reciprocal_rank(ranked_ids: Sequence[str], relevant: set[str]) -> float:
    """1/rank of the first relevant document; 0 when none is retrieved."""
    for position, case_id in enumerate(ranked_ids, start=1):
        if case_id in relevant:
            return 1.0 / position
    return 0.0


def mrr(
    ranked_by_query: Mapping[str, Sequence[str]],
    relevant_by_query: Mapping[str, set[str]],
) -> float:
    """Mean reciprocal rank over a query set."""
    if not ranked_by_query:
        raise EmptyQuerySet("mrr needs at least one query")
    total = 0.0
    for query_id, ranked in ranked_by_query.items():
        total += reciprocal_rank(ranked, relevant_by_query[query_id])
    return total / len(ranked_by_query)


def ndcg_at_k(ranked_ids: Sequence[str], relevant: set[str], k: int) -> float:
    """Binary-gain NDCG: DCG with 1/log2(i+1) discounts over the top k,
    normalized by the ideal ordering; 0 when there is nothing relevant."""
    _check_k(k)
    dcg = 0.0
    for position, case_id in enumerate(ranked_ids[:k], start=1):
        if case_id in relevant:
            dcg += 1.0 / math.log2(position + 1)
    ideal_hits = min(k, len(relevant))
    idcg = sum(1.0 / math.log2(i + 1) for i in range(1, ideal_hits + 1))
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


# --------------------------------------------------------------------------
# Judgment sets
# --------------------------------------------------------------------------


@dataclass
class Judgment:
    """One evaluation query with its binary ground truth."""

    query_id: str
    query_text: str
    relevant_ids: set[str]
    source_id: str | None = None


@dataclass
class JudgmentSet:
    judgments: list[Judgment]

    def __len__(self) -> int:
        return len(self.judgments)

    def __iter__(self):
        return iter(self.judgments)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for j in self.judgments:
                fh.write(
                    json.dumps(
                        {
                            "query_id": j.query_id,
                            "query_text": j.query_text,
                            "relevant_ids": sorted(j.relevant_ids),
                            "source_id": j.source_id,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )

    @classmethod
    def load(cls, path: str) -> "JudgmentSet":
        judgments = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                raw = json.loads(line)
                judgments.append(
                    Judgment(
                        query_id=raw["query_id"],
                        query_text=raw["query_text"],
                        relevant_ids=set(raw["relevant_ids"]),
                        source_id=raw.get("source_id"),
                    )
                )
        return cls(judgments)


def generate_queryset(store: CaseStore, n_queries: int, seed: int) -> JudgmentSet:
    """Sample held-out documents and turn them into judged queries.

    For each sampled document: the query is one seeded-random sentence from
    its body, and the relevant set is every *other* document sharing at least
    one taxonomy code. The source document itself is never relevant (and the
    benchmark excludes it from the searchable pool for that query).
    """
    if n_queries < 1:
        raise InvalidParams(f"n_queries must be >= 1, got {n_queries}")
    docs = list(store.list())
    by_code: dict[str, set[str]] = {}
    for doc in docs:
        for code in doc.taxonomy_codes:
            by_code.setdefault(code, set()).add(doc.id)

    eligible = []
    relevant_of: dict[str, set[str]] = {}
    for doc in docs:
        related: set[str] = set()
        for code in doc.taxonomy_codes:
            related |= by_code[code]
        related.discard(doc.id)
        if related and split_sentences(doc.body):
            eligible.append(doc)
            relevant_of[doc.id] = related
    if len(eligible) < n_queries:
        raise InsufficientCorpus(
            f"need {n_queries} documents with shared taxonomy codes, found {len(eligible)}"
        )

    rng = random.Random(seed)
    sampled = rng.sample(eligible, n_queries)  # docs arrive id-sorted from list()
    judgments = []
    for ordinal, doc in enumerate(sampled, start=1):
        sentences = split_sentences(doc.body)
        query_text = rng.choice(sentences)
        judgments.append(
            Judgment(
                query_id=f"q{ordinal:04d}",
                query_text=query_text,
                relevant_ids=set(relevant_of[doc.id]),
                source_id=doc.id,
            )
        )
    return JudgmentSet(judgments)


# --------------------------------------------------------------------------
# Benchmark
# --------------------------------------------------------------------------


@dataclass
class BenchmarkReport:
    """Aggregated metrics for one system configuration."""

    k: int
    query_count: int
    precision: float
    recall: float
    f1: float
    mrr: float
    ndcg: float
    mean_latency_s: float
    p95_latency_s: float
    config: dict = field(default_factory=dict)
    partial: bool = False
    per_query: dict[str, dict] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "query_count": self.query_count,
            "precision_at_k": self.precision,
            "recall_at_k": self.recall,
            "f1_at_k": self.f1,
            "mrr": self.mrr,
            "ndcg_at_k": self.ndcg,
            "mean_latency_s": self.mean_latency_s,
            "p95_latency_s": self.p95_latency_s,
            "partial": self.partial,
            "config": self.config,
        }


def percentile(values: Sequence[float], fraction: float) -> float:
    """Nearest-rank percentile (the value at ceil(fraction * n), 1-based)."""
    if not values:
        raise InvalidParams("percentile of empty sequence")
    ordered = sorted(values)
    rank = max(1, math.ceil(fraction * len(ordered)))
    return ordered[rank - 1]


def run_benchmark(
    queryset: JudgmentSet,
    search_fn: Callable[[str, int, str | None], list[str]],
    k: int,
    config: dict | None = None,
) -> BenchmarkReport:
    """Execute every judged query and aggregate metrics.

    ``search_fn(query_text, k, exclude_id)`` returns ranked case ids with the
    excluded source document already absent. A pipeline error aborts the run;
    queries completed so far are aggregated and the report is flagged partial.
    """
    _check_k(k)
    if len(queryset) == 0:
        raise EmptyQuerySet("benchmark needs at least one query")

    ranked_by_query: dict[str, list[str]] = {}
    relevant_by_query: dict[str, set[str]] = {}
    latencies: list[float] = []
    per_query: dict[str, dict] = {}
    partial = False
    for judgment in queryset:
        started = time.perf_counter()
        try:
            ranked = list(search_fn(judgment.query_text, k, judgment.source_id))
        except Exception as exc:
            partial = True
            per_query[judgment.query_id] = {"error": f"{type(exc).__name__}: {exc}"}
            break
        elapsed = time.perf_counter() - started
        latencies.append(elapsed)
        ranked_by_query[judgment.query_id] = ranked
        relevant_by_query[judgment.query_id] = judgment.relevant_ids
        per_query[judgment.query_id] = {
            "precision": precision_at_k(ranked, judgment.relevant_ids, k),
            "recall": recall_at_k(ranked, judgment.relevant_ids, k),
            "f1": f1_at_k(ranked, judgment.relevant_ids, k),
            "ndcg": ndcg_at_k(ranked, judgment.relevant_ids, k),
            "reciprocal_rank": reciprocal_rank(ranked, judgment.relevant_ids),
            "latency_s": elapsed,
        }
    if not ranked_by_query:
        raise EmptyQuerySet("every benchmark query failed")

    count = len(ranked_by_query)

    def mean(key: str) -> float:
        return sum(per_query[q][key] for q in ranked_by_query) / count

    return BenchmarkReport(
        k=k,
        query_count=count,
        precision=mean("precision"),
        recall=mean("recall"),
        f1=mean("f1"),
        mrr=mrr(ranked_by_query, relevant_by_query),
        ndcg=mean("ndcg"),
        mean_latency_s=sum(latencies) / len(latencies),
        p95_latency_s=percentile(latencies, 0.95),
        config=dict(config or {}),
        partial=partial,
        per_query=per_query,
    )


def render_table(reports: Mapping[str, BenchmarkReport]) -> str:
    """Aligned-column text table, one row per system."""
    headers = ["System", "P@k", "R@k", "F1", "MRR", "NDCG@k", "Mean s", "p95 s"]
    rows = []
    for name, report in reports.items():
        rows.append(
            [
                name,
                f"{report.precision:.4f}",
                f"{report.recall:.4f}",
                f"{report.f1:.4f}",
                f"{report.mrr:.4f}",
                f"{report.ndcg:.4f}",
                f"{report.mean_latency_s:.4f}",
                f"{report.p95_latency_s:.4f}",
            ]
        )
    widths = [
        max(len(headers[i]), *(len(row[i]) for row in rows)) if rows else len(headers[i])
        for i in range(len(headers))
    ]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * widths[i] for i in range(len(headers))),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)
