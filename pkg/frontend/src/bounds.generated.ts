// Generated by scripts/generate_bounds.py — do not edit by hand.
// Source of truth: the gateway's parameter bounds table; the same
// values drive server-side 422 validation.

export const KNOB_BOUNDS = {
  "k": {
    "max": 10000,
    "min": 1
  },
  "max_rounds": {
    "max": 10,
    "min": 0
  },
  "mmr_lambda": {
    "max": 1.0,
    "min": 0.0
  },
  "n": {
    "max": 1000,
    "min": 1
  },
  "threshold": {
    "max": 1.0,
    "min": 1e-06
  },
  "token_budget": {
    "max": 32768,
    "min": 32
  },
  "weight": {
    "max": 1.0,
    "min": 0.0
  }
} as const;

export const KNOB_DEFAULTS = {
  "k": 100,
  "mmr_lambda": 0.7,
  "n": 10,
  "w_citation": 0.1,
  "w_jurisdiction": 0.1,
  "w_recency": 0.1,
  "w_similarity": 0.7
} as const;

export type BoundName = keyof typeof KNOB_BOUNDS;
export type KnobName = keyof typeof KNOB_DEFAULTS;
