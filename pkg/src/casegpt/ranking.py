"""Candidate ranking: exact cosine re-scoring, multi-factor re-ranking, and
diversity-aware final selection.

The retrieval pipeline is: encode query -> ANN candidate pool (size k) ->
exact cosine re-score -> sort -> metadata re-rank -> marginal-relevance
selection of the final N. Every stage sorts descending by score with ties
broken by ascending case id, so rankings are reproducible.

Re-rank formula (weights normalized to sum 1):

    final = w_sim * (cosine + 1) / 2
          + w_rec * 2 ** (-age_days / half_life_days)
          + w_cit * ln(1 + citations) / ln(1 + max_citations)
          + w_jur * jurisdiction_match   # 1 exact, 0.5 path-prefix, else 0

All factors live in [0, 1], so the blended score does too.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from datetime import date
from typing import Mapping, Sequence

import numpy as np

from .corpus import CaseDocument, CaseStore, CorpusStats
from .encoder import EncoderBackend
from .errors import (
    DimensionMismatch,
    InvalidParams,
    MissingMetadata,
    NotFound,
    ZeroVector,
)
from .hnsw import HnswIndex, Neighbor


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1]."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise DimensionMismatch(f"shapes differ: {va.shape} vs {vb.shape}")
    denom = float(np.linalg.norm(va) * np.linalg.norm(vb))
    if denom == 0.0:
        raise ZeroVector("cosine undefined for zero vectors")
    return float(min(1.0, max(-1.0, float(va @ vb) / denom)))


@dataclass(frozen=True)
class RerankWeights:
    """Blend weights for the re-ranking factors, plus the recency half-life."""

    similarity: float = 0.7
    recency: float = 0.1
    citation: float = 0.1
    jurisdiction: float = 0.1
    half_life_days: float = 1825.0

    def validate(self) -> "RerankWeights":
        raw = (self.similarity, self.recency, self.citation, self.jurisdiction)
        if any(w < 0 for w in raw):
            raise InvalidParams(f"weights must be non-negative, got {raw}")
        if sum(raw) <= 0:
            raise InvalidParams("weights must not all be zero")
        if self.half_life_days <= 0:
            raise InvalidParams(f"half_life_days must be > 0, got {self.half_life_days}")
        return self

    def normalized(self) -> tuple[float, float, float, float]:
        raw = (self.similarity, self.recency, self.citation, self.jurisdiction)
        total = sum(raw)
        return tuple(w / total for w in raw)  # type: ignore[return-value]


@dataclass(frozen=True)
class RetrievalOptions:
    """Knobs governing one retrieval: pool size k, final count n, the
    relevance/diversity trade-off, re-rank weights, and the evaluation date
    used for recency (pass a fixed date for reproducible runs)."""

    k: int = 100
    n: int = 10
    mmr_lambda: float = 0.7
    weights: RerankWeights = field(default_factory=RerankWeights)
    query_jurisdiction: str | None = None
    now: date | None = None

    def validate(self) -> "RetrievalOptions":
        if self.k < 1:
            raise InvalidParams(f"k must be >= 1, got {self.k}")
        if not (1 <= self.n <= self.k):
            raise InvalidParams(f"n must satisfy 1 <= n <= k, got n={self.n} k={self.k}")
        if not (0.0 <= self.mmr_lambda <= 1.0):
            raise InvalidParams(f"lambda must be in [0, 1], got {self.mmr_lambda}")
        self.weights.validate()
        return self

    def effective_now(self) -> date:
        return self.now if self.now is not None else date.today()


@dataclass
class RankedResult:
    """One scored case at a pipeline stage."""

    id: str
    cosine: float
    factors: dict[str, float]
    final_score: float
    rank: int


def recency_score(doc_date: date, now: date, half_life_days: float) -> float:
    """Exponential decay: 1.0 today, 0.5 one half-life ago; future dates clamp to 1."""
    age_days = max(0, (now - doc_date).days)
    return 2.0 ** (-age_days / half_life_days)


def citation_score(count: int, max_count: int) -> float:
    """Log-scaled citation frequency against the corpus maximum."""
    if max_count <= 0:
        return 0.0
    return min(1.0, math.log1p(min(count, max_count)) / math.log1p(max_count))


def jurisdiction_score(doc_jurisdiction: str | None, query_jurisdiction: str | None) -> float:
    """1 for an exact code match, 0.5 when one code is a dot-path prefix of
    the other, 0 otherwise; 1 for every doc when the query has no code."""
    if query_jurisdiction is None:
        return 1.0
    if doc_jurisdiction is None:
        return 0.0
    if doc_jurisdiction == query_jurisdiction:
        return 1.0
    a = doc_jurisdiction.split(".")
    b = query_jurisdiction.split(".")
    shorter, longer = (a, b) if len(a) <= len(b) else (b, a)
    if longer[: len(shorter)] == shorter:
        return 0.5
    return 0.0


def rerank(
    candidates: Sequence[tuple[str, float]],
    documents: Mapping[str, CaseDocument],
    stats: CorpusStats,
    opts: RetrievalOptions,
) -> list[RankedResult]:
    """Blend cosine with recency/citation/jurisdiction factors and re-sort."""
    w_sim, w_rec, w_cit, w_jur = opts.weights.normalized()
    now = opts.effective_now()
    half_life = opts.weights.half_life_days
    results = []
    for case_id, cosine in candidates:
        doc = documents.get(case_id)
        if doc is None:
            raise MissingMetadata(f"no stored document for ranked id {case_id!r}")
        factors = {
            "recency": recency_score(doc.timestamp, now, half_life),
            "citation": citation_score(doc.citation_count, stats.max_citation_count),
            "jurisdiction": jurisdiction_score(doc.jurisdiction, opts.query_jurisdiction),
        }
        final = (
            w_sim * (cosine + 1.0) / 2.0
            + w_rec * factors["recency"]
            + w_cit * factors["citation"]
            + w_jur * factors["jurisdiction"]
        )
        results.append(
            RankedResult(id=case_id, cosine=cosine, factors=factors, final_score=final, rank=0)
        )
    results.sort(key=lambda r: (-r.final_score, r.id))
    for position, result in enumerate(results, start=1):
        result.rank = position
    return results


def mmr_select(
    ids: Sequence[str],
    relevance: Sequence[float],
    similarity: np.ndarray,
    lam: float,
    n: int,
) -> list[int]:
    """Greedy marginal-relevance selection over a candidate pool.

    Picks argmax of ``lam * relevance[i] - (1 - lam) * max_similarity_to_
    selected`` each step (the first pick maximizes relevance alone), ties by
    ascending id. ``similarity`` is the pool's pairwise cosine matrix.
    Returns selected pool indices in pick order; at most ``n``, fewer only
    when the pool is smaller.
    """
    if not (0.0 <= lam <= 1.0):
        raise InvalidParams(f"lambda must be in [0, 1], got {lam}")
    pool = len(ids)
    if pool == 0 or n <= 0:
        return []
    remaining = set(range(pool))
    selected: list[int] = []
    max_sim_to_selected = [0.0] * pool

    first = min(remaining, key=lambda i: (-relevance[i], ids[i]))
    selected.append(first)
    remaining.discard(first)
    while remaining and len(selected) < n:
        newest = selected[-1]
        for i in remaining:
            sim = float(similarity[i, newest])
            if len(selected) == 1 or sim > max_sim_to_selected[i]:
                max_sim_to_selected[i] = sim
        pick = min(
            remaining,
            key=lambda i: (-(lam * relevance[i] - (1.0 - lam) * max_sim_to_selected[i]), ids[i]),
        )
        selected.append(pick)
        remaining.discard(pick)
    return selected


def apply_mmr(
    ranked: Sequence[RankedResult],
    vectors: Mapping[str, np.ndarray],
    n: int,
    lam: float,
) -> list[RankedResult]:
    """Diversify a re-ranked pool down to n results.

    Relevance is the incoming stage score min-max normalized across the pool
    (a constant pool normalizes to all-1), so lambda trades off commensurate
    quantities; redundancy is cosine between case vectors.
    """
    if not ranked:
        return []
    scores = [r.final_score for r in ranked]
    low, high = min(scores), max(scores)
    if high > low:
        relevance = [(s - low) / (high - low) for s in scores]
    else:
        relevance = [1.0] * len(scores)

    matrix = np.stack([vectors[r.id] for r in ranked])
    similarity = matrix @ matrix.T
    picks = mmr_select([r.id for r in ranked], relevance, similarity, lam, n)
    out = []
    for position, pool_index in enumerate(picks, start=1):
        source = ranked[pool_index]
        out.append(
            RankedResult(
                id=source.id,
                cosine=source.cosine,
                factors=dict(source.factors),
                final_score=source.final_score,
                rank=position,
            )
        )
    return out


@dataclass
class RetrievalOutcome:
    """Final results plus per-stage wall-clock timings in seconds."""

    results: list[RankedResult]
    timings: dict[str, float]


def retrieve_cases(
    query_text: str,
    opts: RetrievalOptions,
    index: HnswIndex,
    store: CaseStore,
    encoder: EncoderBackend,
) -> RetrievalOutcome:
    """Run the full retrieval pipeline for one query."""
    opts.validate()
    timings: dict[str, float] = {}
    t0 = time.perf_counter()

    query_vec = encoder.encode(query_text)
    t1 = time.perf_counter()
    timings["encode_s"] = t1 - t0

    pool: list[Neighbor] = index.search(query_vec, opts.k)
    t2 = time.perf_counter()
    timings["search_s"] = t2 - t1

    # Exact re-score: the ANN pass may return approximate scores; this pass
    # recomputes each candidate's cosine from the stored vector.
    rescored = []
    case_vectors: dict[str, np.ndarray] = {}
    for neighbor in pool:
        vec = index.get_vector(neighbor.id)
        case_vectors[neighbor.id] = vec
        rescored.append((neighbor.id, cosine_similarity(query_vec, vec)))
    rescored.sort(key=lambda pair: (-pair[1], pair[0]))
    t3 = time.perf_counter()
    timings["rescore_s"] = t3 - t2

    try:
        documents = store.get_many([case_id for case_id, _ in rescored])
    except NotFound as exc:
        raise MissingMetadata(str(exc)) from exc
    reranked = rerank(rescored, documents, store.stats(), opts)
    t4 = time.perf_counter()
    timings["rerank_s"] = t4 - t3

    final = apply_mmr(reranked, case_vectors, opts.n, opts.mmr_lambda)
    t5 = time.perf_counter()
    timings["mmr_s"] = t5 - t4
    timings["total_s"] = t5 - t0
    return RetrievalOutcome(results=final, timings=timings)
