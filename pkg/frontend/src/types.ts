/** Wire types for the /v1 HTTP API. Field names match the JSON exactly. */

export interface FactorScores {
  recency: number;
  citation: number;
  jurisdiction: number;
}

export interface ResultRow {
  id: string;
  title: string;
  body: string;
  cosine: number;
  factors: FactorScores;
  final_score: number;
  rank: number;
}

export interface SearchResponse {
  results: ResultRow[];
  timings: Record<string, number>;
}

export interface ClaimVerdict {
  sentence: string;
  verified: boolean;
  best_case_id: string | null;
  overlap: number;
  cited_ids: string[];
}

export type ReportStatus = "grounded" | "partially_grounded" | "failed";

export interface InsightResponse {
  text: string;
  citations: string[];
  claim_verdicts: ClaimVerdict[];
  refinement_rounds_used: number;
  status: ReportStatus;
  stripped_sentences: string[];
  failure_reason: string | null;
  retrieval: ResultRow[];
  timings: Record<string, number>;
}

export interface KnobBound {
  min: number;
  max: number;
}

export interface StatsResponse {
  corpus: {
    doc_count: number;
    max_citation_count: number;
    jurisdictions: string[];
    domain_counts: Record<string, number>;
  };
  index: {
    live_count: number;
    node_count: number;
    tombstone_count: number;
    max_layer: number;
    dim: number;
  };
  params: Record<string, number>;
  retrieval_defaults: Record<string, number>;
  bounds: Record<string, KnobBound>;
}

export interface HealthResponse {
  status: string;
  version: string;
  index: Record<string, number>;
  corpus: Record<string, number>;
}

export interface ErrorEnvelope {
  error: {
    code: string;
    message: string;
  };
}

/** Knobs the console sends with every search/insight request. */
export interface SearchKnobs {
  k: number;
  n: number;
  mmr_lambda: number;
  w_similarity: number;
  w_recency: number;
  w_citation: number;
  w_jurisdiction: number;
}
