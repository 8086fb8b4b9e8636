"""Grounded insight generation over retrieved cases.

Pipeline: expand the query with related corpus terms, aggregate the retrieved
cases into a weighted extract bundle under a token budget, construct a
deterministic prompt, call a generation backend, then fact-check each output
sentence against the retrieved evidence and iteratively re-prompt until the
report is grounded (or rounds run out, at which point unverified sentences
are stripped).

Grounding is mechanical and auditable: a sentence is *verified* iff every
``[CASE:<id>]`` marker it carries resolves to a retrieved case AND its
content-word Jaccard overlap with the best width-3 sentence window of any
retrieved case reaches the threshold. A report is ``grounded`` only when all
sentences verify.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import CaseDocument, CaseStore
from .encoder import EncoderBackend, tokenize
from .errors import (
    BackendUnavailable,
    BudgetTooSmall,
    EmptyIndex,
    EmptyText,
    InvalidParams,
    NoCases,
    UnknownTemplate,
)
from .generation import CITATION_PATTERN, GenerationBackend
from .hnsw import HnswIndex
from .ranking import RankedResult, RetrievalOptions, retrieve_cases

MIN_TOKEN_BUDGET = 32

# Trailing-dot words that do not end a sentence in medical/legal prose.
_ABBREVIATIONS = {
    "v.", "vs.", "no.", "nos.", "dr.", "mr.", "mrs.", "ms.", "prof.",
    "e.g.", "i.e.", "etc.", "cf.", "al.", "st.", "inc.", "co.", "corp.",
    "fig.", "approx.", "dept.", "sec.",
}

_BOUNDARY_RE = re.compile(r"[.?!](\s+)(?=[A-Z0-9])")

_STOPWORDS = frozenset(
    """a an and are as at be been but by for from had has have he her his i in
    is it its of on or she that the their them they this to was were which
    will with would""".split()
)


def split_sentences(text: str) -> list[str]:
    """Split prose at ``.?!`` boundaries followed by whitespace and an
    uppercase letter or digit, guarding a fixed abbreviation list."""
    sentences: list[str] = []
    start = 0
    for match in _BOUNDARY_RE.finditer(text):
        end = match.start() + 1  # include the punctuation mark
        word_start = max(text.rfind(" ", 0, end), text.rfind("\n", 0, end))
        word = text[word_start + 1 : end].lower()
        if word in _ABBREVIATIONS:
            continue
        piece = text[start:end].strip()
        if piece:
            sentences.append(piece)
        start = match.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def content_words(text: str) -> set[str]:
    """Lowercased alphanumeric tokens minus a fixed stopword list."""
    try:
        tokens = tokenize(text)
    except EmptyText:
        return set()
    return {t for t in tokens if t not in _STOPWORDS}


def _jaccard(a: set[str], b: set[str]) -> float:
    if not a or not b:
        return 0.0
    return len(a & b) / len(a | b)


# --------------------------------------------------------------------------
# Options and report types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class InsightOptions:
    """Generation-stage knobs: grounding threshold, refinement rounds,
    context token budget, weighting temperature, and expansion size."""

    threshold: float = 0.2
    max_rounds: int = 2
    token_budget: int = 2048
    tau: float = 0.5
    expansion_terms: int = 5
    template: str = "default"
    max_tokens: int = 512
    temperature: float = 0.0

    def validate(self) -> "InsightOptions":
        if not (0.0 < self.threshold <= 1.0):
            raise InvalidParams(f"threshold must be in (0, 1], got {self.threshold}")
        if self.max_rounds < 0:
            raise InvalidParams(f"max_rounds must be >= 0, got {self.max_rounds}")
        if self.token_budget < MIN_TOKEN_BUDGET:
            raise InvalidParams(
                f"token_budget must be >= {MIN_TOKEN_BUDGET}, got {self.token_budget}"
            )
        if self.tau <= 0:
            raise InvalidParams(f"tau must be > 0, got {self.tau}")
        if self.expansion_terms < 0:
            raise InvalidParams(f"expansion_terms must be >= 0, got {self.expansion_terms}")
        return self


@dataclass
class CaseExtract:
    """Sentences selected from one retrieved case, in original order."""

    case_id: str
    sentences: list[tuple[int, str]]  # (sentence index in body, sentence)
    weight: float


@dataclass
class ContextBundle:
    """Weighted evidence package a prompt is built from."""

    query: str
    expanded_terms: list[str]
    extracts: list[CaseExtract]
    token_budget: int
    token_estimate: int


@dataclass
class ClaimVerdict:
    """Grounding outcome for one output sentence."""

    sentence: str
    verified: bool
    best_case_id: str | None
    overlap: float
    cited_ids: list[str]


@dataclass
class InsightReport:
    """Generated prose plus its per-sentence grounding audit trail."""

    text: str
    citations: list[str]
    claim_verdicts: list[ClaimVerdict]
    refinement_rounds_used: int
    status: str  # grounded | partially_grounded | failed
    stripped_sentences: list[str] = field(default_factory=list)
    failure_reason: str | None = None
    retrieval: list[RankedResult] | None = None
    timings: dict[str, float] | None = None


# --------------------------------------------------------------------------
# Query expansion
# --------------------------------------------------------------------------


def expand_query(
    query_text: str, store: CaseStore, encoder: EncoderBackend, m: int
) -> list[str]:
    """The m corpus vocabulary terms (document frequency >= 2, absent from
    the query) most similar to the whole-query vector; ties lexicographic."""
    if m <= 0:
        return []
    query_tokens = set(tokenize(query_text))
    query_vec = encoder.encode(query_text)

    doc_frequency: Counter[str] = Counter()
    for doc in store.list():
        try:
            doc_frequency.update(set(tokenize(doc.body)))
        except EmptyText:
            continue
    vocabulary = sorted(
        term
        for term, count in doc_frequency.items()
        if count >= 2 and term not in query_tokens
    )
    if not vocabulary:
        return []
    scored = [
        (float(query_vec @ encoder.encode(term)), term) for term in vocabulary
    ]
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [term for _, term in scored[:m]]


# --------------------------------------------------------------------------
# Context aggregation
# --------------------------------------------------------------------------


def _softmax_weights(scores: Sequence[float], tau: float) -> list[float]:
    scaled = [s / tau for s in scores]
    peak = max(scaled)
    exps = [math.exp(s - peak) for s in scaled]
    total = sum(exps)
    return [e / total for e in exps]


def _allocate(weights: Sequence[float], total: int, caps: Sequence[int]) -> list[int]:
    """Largest-remainder apportionment of ``total`` slots by weight, capped
    per item; capped surplus re-flows to items with spare capacity."""
    n = len(weights)
    alloc = [0] * n
    target = min(total, sum(caps))
    while sum(alloc) < target:
        free = [i for i in range(n) if alloc[i] < caps[i]]
        weight_sum = sum(weights[i] for i in free)
        need = target - sum(alloc)
        if weight_sum <= 0:
            break
        shares = {i: weights[i] / weight_sum * need for i in free}
        grants = {i: min(int(math.floor(shares[i])), caps[i] - alloc[i]) for i in free}
        leftover = need - sum(grants.values())
        by_remainder = sorted(
            (i for i in free if alloc[i] + grants[i] < caps[i]),
            key=lambda i: (-(shares[i] - math.floor(shares[i])), i),
        )
        for i in by_remainder:
            if leftover <= 0:
                break
            grants[i] += 1
            leftover -= 1
        for i, extra in grants.items():
            alloc[i] += extra
    return alloc


def aggregate_context(
    query_text: str,
    results: Sequence[RankedResult],
    documents: Mapping[str, CaseDocument],
    opts: InsightOptions,
    encoder: EncoderBackend,
    expanded_terms: Sequence[str] | None = None,
) -> ContextBundle:
    """Select case sentences under the token budget.

    Case weights are a temperature softmax over final scores. The sentence
    budget is apportioned to cases by largest remainder (capped at each
    case's sentence count); within a case, sentences are chosen by embedding
    similarity to the query and emitted in original order. The overall
    sentence budget is the largest count whose whitespace-token total fits.
    """
    if not results:
        raise NoCases("cannot aggregate context from zero retrieved cases")
    if opts.token_budget < MIN_TOKEN_BUDGET:
        raise BudgetTooSmall(
            f"token budget {opts.token_budget} below minimum {MIN_TOKEN_BUDGET}"
        )
    query_vec = encoder.encode(query_text)
    weights = _softmax_weights([r.final_score for r in results], opts.tau)

    per_case: list[dict] = []
    for result in results:
        doc = documents[result.id]
        sentences = split_sentences(doc.body)
        sims = []
        for sentence in sentences:
            try:
                sims.append(float(query_vec @ encoder.encode(sentence)))
            except EmptyText:
                sims.append(-2.0)  # below any real cosine: never preferred
        preference = sorted(range(len(sentences)), key=lambda i: (-sims[i], i))
        tokens = [len(s.split()) for s in sentences]
        per_case.append(
            {"sentences": sentences, "preference": preference, "tokens": tokens}
        )

    caps = [len(c["sentences"]) for c in per_case]
    total_sentences = sum(caps)

    def cost(allocation: list[int]) -> int:
        spent = 0
        for case, quota in zip(per_case, allocation):
            for sentence_index in case["preference"][:quota]:
                spent += case["tokens"][sentence_index]
        return spent

    chosen_alloc: list[int] | None = None
    for budget_sentences in range(total_sentences, 0, -1):
        allocation = _allocate(weights, budget_sentences, caps)
        if cost(allocation) <= opts.token_budget:
            chosen_alloc = allocation
            break
    if chosen_alloc is None or sum(chosen_alloc) == 0:
        raise BudgetTooSmall(
            f"no case sentence fits in a budget of {opts.token_budget} tokens"
        )

    extracts = []
    estimate = 0
    for result, case, quota, weight in zip(results, per_case, chosen_alloc, weights):
        picked = sorted(case["preference"][:quota])
        extracts.append(
            CaseExtract(
                case_id=result.id,
                sentences=[(i, case["sentences"][i]) for i in picked],
                weight=weight,
            )
        )
        estimate += sum(case["tokens"][i] for i in picked)
    return ContextBundle(
        query=query_text,
        expanded_terms=list(expanded_terms or []),
        extracts=extracts,
        token_budget=opts.token_budget,
        token_estimate=estimate,
    )


# --------------------------------------------------------------------------
# Prompt construction
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PromptTemplate:
    header: str
    footer: str


PROMPT_TEMPLATES: dict[str, PromptTemplate] = {
    "default": PromptTemplate(
        header=(
            "You are a case-analysis assistant. Using only the cases provided "
            "below, write a concise insight summary answering the query."
        ),
        footer=(
            "Write complete sentences. After every factual claim, add a "
            "citation marker of the form [CASE:<id>] naming the supporting "
            "case, placed before the sentence's closing punctuation. Use "
            "only ids that appear above. Do not introduce facts that are "
            "absent from the cases."
        ),
    ),
}


def construct_prompt(bundle: ContextBundle, template_id: str = "default") -> str:
    """Deterministic prompt assembly: header, verbatim query, expanded terms,
    per-case sections in rank order, output-format instructions."""
    template = PROMPT_TEMPLATES.get(template_id)
    if template is None:
        raise UnknownTemplate(f"no prompt template named {template_id!r}")
    sections = []
    for extract in bundle.extracts:
        lines = [f"[CASE:{extract.case_id}] (weight {extract.weight:.4f})"]
        lines.extend(sentence for _, sentence in extract.sentences)
        sections.append("\n".join(lines))
    terms = ", ".join(bundle.expanded_terms) if bundle.expanded_terms else "(none)"
    return "\n\n".join(
        [
            template.header,
            "== QUERY ==\n" + bundle.query,
            "== RELATED TERMS ==\n" + terms,
            "== CASES ==",
            *sections,
            "== OUTPUT ==\n" + template.footer,
        ]
    )


# --------------------------------------------------------------------------
# Fact checking and refinement
# --------------------------------------------------------------------------


def _case_windows(doc: CaseDocument, width: int = 3) -> list[tuple[int, set[str]]]:
    """Content-word sets of all contiguous sentence windows (width 3, or the
    whole body when it has fewer sentences)."""
    sentences = split_sentences(doc.body)
    if not sentences:
        return []
    effective = min(width, len(sentences))
    windows = []
    for start in range(len(sentences) - effective + 1):
        text = " ".join(sentences[start : start + effective])
        windows.append((start, content_words(text)))
    return windows


def fact_check(
    text: str,
    retrieved: Mapping[str, CaseDocument],
    threshold: float,
) -> InsightReport:
    """Verify each sentence of generated text against retrieved evidence."""
    if not (0.0 < threshold <= 1.0):
        raise InvalidParams(f"threshold must be in (0, 1], got {threshold}")
    sentences = split_sentences(text)
    if not sentences:
        return InsightReport(
            text="",
            citations=[],
            claim_verdicts=[],
            refinement_rounds_used=0,
            status="failed",
            failure_reason="empty generation",
        )

    window_sets = {
        case_id: _case_windows(doc) for case_id, doc in sorted(retrieved.items())
    }
    verdicts = []
    for sentence in sentences:
        cited = CITATION_PATTERN.findall(sentence)
        words = content_words(CITATION_PATTERN.sub(" ", sentence))
        best_overlap = 0.0
        best_case: str | None = None
        for case_id in sorted(window_sets):
            for _, window_words in window_sets[case_id]:
                overlap = _jaccard(words, window_words)
                if overlap > best_overlap:
                    best_overlap = overlap
                    best_case = case_id
        citations_resolve = all(cid in retrieved for cid in cited)
        verified = citations_resolve and best_overlap >= threshold
        verdicts.append(
            ClaimVerdict(
                sentence=sentence,
                verified=verified,
                best_case_id=best_case,
                overlap=best_overlap,
                cited_ids=cited,
            )
        )

    verified_count = sum(1 for v in verdicts if v.verified)
    if verified_count == len(verdicts):
        status = "grounded"
    elif verified_count > 0:
        status = "partially_grounded"
    else:
        status = "failed"
    return InsightReport(
        text=text,
        citations=_ordered_citations(text),
        claim_verdicts=verdicts,
        refinement_rounds_used=0,
        status=status,
    )


def _ordered_citations(text: str) -> list[str]:
    seen: dict[str, None] = {}
    for case_id in CITATION_PATTERN.findall(text):
        seen.setdefault(case_id)
    return list(seen)


def _correction_section(unverified: Sequence[str]) -> str:
    lines = [
        "== CORRECTIONS ==",
        "The following sentences could not be verified against the provided "
        "cases. Revise each one to match the case text (with a correct "
        "[CASE:<id>] marker) or remove it:",
    ]
    lines.extend(f"- {sentence}" for sentence in unverified)
    return "\n".join(lines)


def iterative_refine(
    report: InsightReport,
    bundle: ContextBundle,
    backend: GenerationBackend,
    retrieved: Mapping[str, CaseDocument],
    opts: InsightOptions,
) -> InsightReport:
    """Re-prompt up to ``max_rounds`` times while the report is ungrounded,
    then strip whatever remains unverified.

    With ``max_rounds`` 0 the input report is returned unchanged. Otherwise
    the final report's text contains only verified sentences; stripped ones
    are listed, and the verdict list still covers the full last generation.
    """
    if opts.max_rounds <= 0:
        return report

    current = report
    rounds = 0
    while rounds < opts.max_rounds and current.status != "grounded":
        unverified = [v.sentence for v in current.claim_verdicts if not v.verified]
        prompt = construct_prompt(bundle, opts.template)
        if unverified:
            prompt = prompt + "\n\n" + _correction_section(unverified)
        text = backend.generate(prompt, opts.max_tokens, opts.temperature)
        rounds += 1
        current = fact_check(text, retrieved, opts.threshold)
    current.refinement_rounds_used = rounds

    if current.status != "grounded" and current.claim_verdicts:
        kept = [v.sentence for v in current.claim_verdicts if v.verified]
        stripped = [v.sentence for v in current.claim_verdicts if not v.verified]
        current.text = " ".join(kept)
        current.citations = _ordered_citations(current.text)
        current.stripped_sentences = stripped
        current.status = "partially_grounded" if kept else "failed"
    return current


# --------------------------------------------------------------------------
# End-to-end
# --------------------------------------------------------------------------


def generate_insights(
    query_text: str,
    retrieval_opts: RetrievalOptions,
    insight_opts: InsightOptions,
    index: HnswIndex,
    store: CaseStore,
    encoder: EncoderBackend,
    backend: GenerationBackend,
) -> InsightReport:
    """Retrieve, aggregate, prompt, generate, fact-check, refine.

    A generation-backend outage yields a ``failed`` report that still carries
    the retrieval results; retrieval-stage errors propagate.
    """
    insight_opts.validate()
    try:
        outcome = retrieve_cases(query_text, retrieval_opts, index, store, encoder)
    except EmptyIndex as exc:
        raise NoCases(f"no cases available to retrieve: {exc}") from exc

    documents = store.get_many([r.id for r in outcome.results])
    expanded = expand_query(query_text, store, encoder, insight_opts.expansion_terms)
    bundle = aggregate_context(
        query_text, outcome.results, documents, insight_opts, encoder, expanded
    )
    prompt = construct_prompt(bundle, insight_opts.template)
    try:
        text = backend.generate(prompt, insight_opts.max_tokens, insight_opts.temperature)
        report = fact_check(text, documents, insight_opts.threshold)
        report = iterative_refine(report, bundle, backend, documents, insight_opts)
    except BackendUnavailable as exc:
        report = InsightReport(
            text="",
            citations=[],
            claim_verdicts=[],
            refinement_rounds_used=0,
            status="failed",
            failure_reason=str(exc),
        )
    report.retrieval = list(outcome.results)
    report.timings = dict(outcome.timings)
    return report
