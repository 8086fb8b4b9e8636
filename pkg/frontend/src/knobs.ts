/** Input-time knob validation against the generated bounds table.
 *
 * The same numbers drive the server's 422 responses, so anything rejected
 * here would be rejected by the gateway, and anything accepted here is
 * within the gateway's documented ranges.
 */

import { KNOB_BOUNDS } from "./bounds.generated";
import type { SearchKnobs } from "./types";

/** Which bounds entry constrains each request knob. */
const BOUND_FOR_KNOB: Record<keyof SearchKnobs, keyof typeof KNOB_BOUNDS> = {
  k: "k",
  n: "n",
  mmr_lambda: "mmr_lambda",
  w_similarity: "weight",
  w_recency: "weight",
  w_citation: "weight",
  w_jurisdiction: "weight",
};

export interface KnobViolation {
  knob: keyof SearchKnobs;
  value: number;
  min: number;
  max: number;
  message: string;
}

export function validateKnobs(knobs: SearchKnobs): KnobViolation[] {
  const violations: KnobViolation[] = [];
  for (const name of Object.keys(BOUND_FOR_KNOB) as (keyof SearchKnobs)[]) {
    const value = knobs[name];
    const bound = KNOB_BOUNDS[BOUND_FOR_KNOB[name]];
    if (Number.isNaN(value) || value < bound.min || value > bound.max) {
      violations.push({
        knob: name,
        value,
        min: bound.min,
        max: bound.max,
        message: `${name} must be between ${bound.min} and ${bound.max}`,
      });
    }
  }
  if (knobs.n > knobs.k) {
    violations.push({
      knob: "n",
      value: knobs.n,
      min: 1,
      max: knobs.k,
      message: "n must not exceed k",
    });
  }
  return violations;
}

/** Bounds for one knob, for wiring input min/max attributes. */
export function boundsFor(name: keyof SearchKnobs): { min: number; max: number } {
  return KNOB_BOUNDS[BOUND_FOR_KNOB[name]];
}
