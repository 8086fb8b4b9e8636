/** Console state machine.
 *
 * Owns the single source of display state and the request lifecycle rules:
 * at most one in-flight search and one in-flight insight; a newer search
 * supersedes (aborts) the older one and any insight generated for the
 * superseded result set; failures become banners while the last good
 * results stay on screen; nothing is ever retried automatically.
 */

import { ApiError, GatewayClient, isAbortError } from "./api";
import { KNOB_DEFAULTS } from "./bounds.generated";
import { validateKnobs, type KnobViolation } from "./knobs";
import type { InsightResponse, ResultRow, SearchKnobs } from "./types";

export interface Banner {
  kind: "error" | "info";
  text: string;
}

export interface ConsoleState {
  query: string;
  knobs: SearchKnobs;
  knobViolations: KnobViolation[];
  rows: ResultRow[];
  timings: Record<string, number>;
  selectedId: string | null;
  /** Query whose results are currently displayed; gates the insight control. */
  completedQuery: string | null;
  insight: InsightResponse | null;
  searchInFlight: boolean;
  insightInFlight: boolean;
  banner: Banner | null;
}

export function initialState(): ConsoleState {
  return {
    query: "",
    knobs: {
      k: KNOB_DEFAULTS.k,
      n: KNOB_DEFAULTS.n,
      mmr_lambda: KNOB_DEFAULTS.mmr_lambda,
      w_similarity: KNOB_DEFAULTS.w_similarity,
      w_recency: KNOB_DEFAULTS.w_recency,
      w_citation: KNOB_DEFAULTS.w_citation,
      w_jurisdiction: KNOB_DEFAULTS.w_jurisdiction,
    },
    knobViolations: [],
    rows: [],
    timings: {},
    selectedId: null,
    completedQuery: null,
    insight: null,
    searchInFlight: false,
    insightInFlight: false,
    banner: null,
  };
}

export class ConsoleController {
  readonly state: ConsoleState;
  private searchAbort: AbortController | null = null;
  private insightAbort: AbortController | null = null;
  private searchSeq = 0;
  private insightSeq = 0;
  private readonly listeners: (() => void)[] = [];

  constructor(private readonly client: GatewayClient) {
    this.state = initialState();
  }

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  setQuery(query: string): void {
    this.state.query = query;
    this.notify();
  }

  setKnob(name: keyof SearchKnobs, value: number): void {
    this.state.knobs[name] = value;
    this.state.knobViolations = validateKnobs(this.state.knobs);
    this.notify();
  }

  selectCase(id: string | null): void {
    this.state.selectedId = id;
    this.notify();
  }

  canSearch(): boolean {
    return (
      this.state.query.trim().length > 0 && this.state.knobViolations.length === 0
    );
  }

  canRequestInsight(): boolean {
    return this.state.completedQuery !== null && !this.state.insightInFlight;
  }

  async runSearch(): Promise<void> {
    const query = this.state.query.trim();
    if (query.length === 0) {
      this.state.banner = { kind: "info", text: "enter a query to search" };
      this.notify();
      return;
    }
    this.state.knobViolations = validateKnobs(this.state.knobs);
    if (this.state.knobViolations.length > 0) {
      const first = this.state.knobViolations[0];
      this.state.banner = {
        kind: "error",
        text: first ? first.message : "knob out of range",
      };
      this.notify();
      return;
    }

    // Supersede: the newer search aborts the older one, and any in-flight
    // insight belongs to a result set that is about to be replaced.
    this.searchAbort?.abort();
    this.insightAbort?.abort();
    this.insightSeq += 1;
    this.state.insightInFlight = false;
    const seq = ++this.searchSeq;
    const abort = new AbortController();
    this.searchAbort = abort;
    this.state.searchInFlight = true;
    this.state.banner = null;
    this.notify();

    try {
      const response = await this.client.search(
        { query, ...this.state.knobs },
        abort.signal,
      );
      if (seq !== this.searchSeq) return; // superseded while awaiting
      this.state.rows = response.results;
      this.state.timings = response.timings;
      this.state.completedQuery = query;
      this.state.insight = null;
      if (
        this.state.selectedId !== null &&
        !response.results.some((row) => row.id === this.state.selectedId)
      ) {
        this.state.selectedId = null;
      }
    } catch (error) {
      if (seq !== this.searchSeq || isAbortError(error)) return;
      this.state.banner = searchBanner(error);
      // previous rows intentionally retained
    } finally {
      if (seq === this.searchSeq) {
        this.state.searchInFlight = false;
        this.notify();
      }
    }
  }

  async runInsight(): Promise<void> {
    if (!this.canRequestInsight()) return;
    const query = this.state.completedQuery;
    if (query === null) return;
    const seq = ++this.insightSeq;
    const abort = new AbortController();
    this.insightAbort = abort;
    this.state.insightInFlight = true;
    this.state.banner = null;
    this.notify();

    try {
      const response = await this.client.insights(
        { query, ...this.state.knobs },
        abort.signal,
      );
      if (seq !== this.insightSeq) return; // a newer search superseded us
      this.state.insight = response;
    } catch (error) {
      if (seq !== this.insightSeq || isAbortError(error)) return;
      this.state.banner = insightBanner(error);
      // retrieval results stay visible either way
    } finally {
      if (seq === this.insightSeq) {
        this.state.insightInFlight = false;
        this.notify();
      }
    }
  }
}

function searchBanner(error: unknown): Banner {
  if (error instanceof ApiError) {
    return { kind: "error", text: `${error.code}: ${error.message}` };
  }
  return { kind: "error", text: "server unreachable; showing last results" };
}

function insightBanner(error: unknown): Banner {
  if (error instanceof ApiError && error.status === 503) {
    return { kind: "error", text: "generation backend unavailable" };
  }
  if (error instanceof ApiError) {
    return { kind: "error", text: `${error.code}: ${error.message}` };
  }
  return { kind: "error", text: "server unreachable; insight request failed" };
}
