/** Pure mapping from API payloads to display structures.
 *
 * Functions here re-label and re-group fields; they never rank, score, or
 * verify. Every number that reaches the screen is an API value passed
 * through unchanged, and every list keeps the API's order — the contract
 * tests pin both properties against recorded responses.
 */

import type {
  ClaimVerdict,
  InsightResponse,
  ResultRow,
  SearchResponse,
} from "./types";

export interface RowView {
  id: string;
  title: string;
  body: string;
  cosine: number;
  finalScore: number;
  rank: number;
  factors: { name: string; value: number }[];
}

export interface SearchView {
  rows: RowView[];
  timings: { stage: string; seconds: number }[];
}

const FACTOR_ORDER = ["recency", "citation", "jurisdiction"] as const;

export function toSearchView(response: SearchResponse): SearchView {
  return {
    rows: response.results.map(toRowView),
    timings: Object.entries(response.timings).map(([stage, seconds]) => ({
      stage,
      seconds,
    })),
  };
}

export function toRowView(row: ResultRow): RowView {
  return {
    id: row.id,
    title: row.title,
    body: row.body,
    cosine: row.cosine,
    finalScore: row.final_score,
    rank: row.rank,
    factors: FACTOR_ORDER.map((name) => ({ name, value: row.factors[name] })),
  };
}

export type BadgeState = "verified" | "unverified-stripped";

export interface Badge {
  sentence: string;
  state: BadgeState;
  bestCaseId: string | null;
  overlap: number;
  citedIds: string[];
}

export type Segment =
  | { kind: "text"; text: string }
  | { kind: "citation"; caseId: string; resolved: boolean };

export interface InsightView {
  status: InsightResponse["status"];
  statusLabel: string;
  roundsUsed: number;
  segments: Segment[];
  badges: Badge[];
  strippedSentences: string[];
  failureReason: string | null;
  citations: string[];
  retrievalRows: RowView[];
}

const STATUS_LABELS: Record<InsightResponse["status"], string> = {
  grounded: "grounded",
  partially_grounded: "partially grounded",
  failed: "generation failed",
};

export function toBadge(verdict: ClaimVerdict): Badge {
  return {
    sentence: verdict.sentence,
    state: verdict.verified ? "verified" : "unverified-stripped",
    bestCaseId: verdict.best_case_id,
    overlap: verdict.overlap,
    citedIds: verdict.cited_ids,
  };
}

const CITATION_SPLIT = /(\[CASE:[^\]\s]+\])/g;
const CITATION_ONE = /^\[CASE:([^\]\s]+)\]$/;

/** Split report text into plain-text and citation-marker segments. */
export function citationSegments(
  text: string,
  knownCaseIds: ReadonlySet<string>,
): Segment[] {
  const segments: Segment[] = [];
  for (const piece of text.split(CITATION_SPLIT)) {
    if (piece === "") continue;
    const marker = CITATION_ONE.exec(piece);
    if (marker && marker[1] !== undefined) {
      segments.push({
        kind: "citation",
        caseId: marker[1],
        resolved: knownCaseIds.has(marker[1]),
      });
    } else {
      segments.push({ kind: "text", text: piece });
    }
  }
  return segments;
}

export function toInsightView(response: InsightResponse): InsightView {
  const knownIds = new Set(response.retrieval.map((row) => row.id));
  return {
    status: response.status,
    statusLabel: STATUS_LABELS[response.status],
    roundsUsed: response.refinement_rounds_used,
    segments: citationSegments(response.text, knownIds),
    badges: response.claim_verdicts.map(toBadge),
    strippedSentences: response.stripped_sentences,
    failureReason: response.failure_reason,
    citations: response.citations,
    retrievalRows: response.retrieval.map(toRowView),
  };
}

export interface HighlightedSentence {
  text: string;
  matched: boolean;
}

function escapeRegExp(raw: string): string {
  return raw.replace(/[.*+?^${}()|[\]\\]/g, "\\$&");
}

/** Mark the sentences of a case body that share a word with the query. */
export function highlightSentences(
  body: string,
  query: string,
): HighlightedSentence[] {
  const tokens = query
    .toLowerCase()
    .split(/\s+/)
    .filter((token) => token.length > 0);
  const matchers = tokens.map(
    (token) => new RegExp(`\\b${escapeRegExp(token)}\\b`, "i"),
  );
  return body
    .split(/(?<=[.!?])\s+/)
    .filter((sentence) => sentence.length > 0)
    .map((sentence) => ({
      text: sentence,
      matched: matchers.some((matcher) => matcher.test(sentence)),
    }));
}
