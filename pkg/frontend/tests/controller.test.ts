/** Request-lifecycle contract: one in-flight search and one in-flight
 * insight at most, newer searches supersede older ones, failures become
 * banners while the last good results stay visible, and nothing retries.
 */

import { describe, expect, it } from "vitest";

import { GatewayClient } from "../src/api";
import { ConsoleController } from "../src/controller";
import type { InsightResponse, SearchResponse } from "../src/types";
import diversifiedFixture from "./fixtures/search_diversified.json";
import error422Fixture from "./fixtures/error_422.json";
import error503Fixture from "./fixtures/error_503.json";
import groundedFixture from "./fixtures/insight_grounded.json";
import relevanceFixture from "./fixtures/search_relevance.json";
import {
  deferredFetch,
  flushMicrotasks,
  recordedFetch,
  type RecordedFixture,
} from "./helpers";

const relevanceIds = (relevanceFixture.response as SearchResponse).results.map(
  (row) => row.id,
);
const diversifiedIds = (diversifiedFixture.response as SearchResponse).results.map(
  (row) => row.id,
);

function makeController(fixtures: RecordedFixture[]) {
  const { fetchFn, calls } = recordedFetch(fixtures);
  const controller = new ConsoleController(new GatewayClient("", fetchFn));
  return { controller, calls };
}

describe("search lifecycle", () => {
  it("loads rows, timings, and the completed query on success", async () => {
    const { controller, calls } = makeController([
      relevanceFixture as RecordedFixture,
    ]);
    controller.setQuery("chest pain emergency");
    await controller.runSearch();

    expect(calls.length).toBe(1);
    expect(calls[0]!.method).toBe("POST");
    expect(calls[0]!.url).toBe("/v1/search");
    expect(controller.state.rows.map((row) => row.id)).toEqual(relevanceIds);
    expect(Object.keys(controller.state.timings).length).toBeGreaterThan(0);
    expect(controller.state.completedQuery).toBe("chest pain emergency");
    expect(controller.state.searchInFlight).toBe(false);
    expect(controller.state.banner).toBeNull();
  });

  it("sends the current knob values in the request body", async () => {
    const { controller, calls } = makeController([
      relevanceFixture as RecordedFixture,
    ]);
    controller.setQuery("chest pain emergency");
    controller.setKnob("k", 8);
    controller.setKnob("n", 5);
    controller.setKnob("mmr_lambda", 0.3);
    await controller.runSearch();

    const body = calls[0]!.body as Record<string, unknown>;
    expect(body.query).toBe("chest pain emergency");
    expect(body.k).toBe(8);
    expect(body.n).toBe(5);
    expect(body.mmr_lambda).toBe(0.3);
    expect(body.w_similarity).toBe(controller.state.knobs.w_similarity);
  });

  it("refuses to send an empty query", async () => {
    const { controller, calls } = makeController([
      relevanceFixture as RecordedFixture,
    ]);
    controller.setQuery("   ");
    await controller.runSearch();

    expect(calls.length).toBe(0);
    expect(controller.state.banner).toEqual({
      kind: "info",
      text: "enter a query to search",
    });
  });

  it("refuses to send out-of-bounds knobs", async () => {
    const { controller, calls } = makeController([
      relevanceFixture as RecordedFixture,
    ]);
    controller.setQuery("chest pain emergency");
    controller.setKnob("k", 10001);
    await controller.runSearch();

    expect(calls.length).toBe(0);
    expect(controller.state.banner?.kind).toBe("error");
    expect(controller.state.knobViolations.some((v) => v.knob === "k")).toBe(true);
  });

  it("keeps the last good rows and shows a banner when the server is unreachable", async () => {
    const { fetchFn, calls } = recordedFetch([relevanceFixture as RecordedFixture]);
    let serverUp = true;
    let failedCalls = 0;
    const flakyFetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
      if (!serverUp) {
        failedCalls += 1;
        throw new TypeError("network down");
      }
      return fetchFn(input, init);
    }) as typeof fetch;
    const controller = new ConsoleController(new GatewayClient("", flakyFetch));

    controller.setQuery("chest pain emergency");
    await controller.runSearch();
    expect(controller.state.rows.length).toBeGreaterThan(0);

    serverUp = false;
    controller.setQuery("follow-up question");
    await controller.runSearch();

    expect(calls.length).toBe(1);
    expect(failedCalls).toBe(1); // no silent retry
    expect(controller.state.rows.map((row) => row.id)).toEqual(relevanceIds);
    expect(controller.state.completedQuery).toBe("chest pain emergency");
    expect(controller.state.banner).toEqual({
      kind: "error",
      text: "server unreachable; showing last results",
    });
    expect(controller.state.searchInFlight).toBe(false);
  });

  it("surfaces a rejected-parameter response as its gateway error message", async () => {
    const { controller, calls } = makeController([
      error422Fixture as RecordedFixture,
    ]);
    controller.setQuery("chest pain emergency");
    await controller.runSearch();

    expect(calls.length).toBe(1);
    expect(controller.state.banner).toEqual({
      kind: "error",
      text: "invalid_params: k: Input should be less than or equal to 10000",
    });
  });
});

describe("search supersession", () => {
  it("aborts the older in-flight search when a newer one starts", async () => {
    const { fetchFn, pending } = deferredFetch();
    const controller = new ConsoleController(new GatewayClient("", fetchFn));

    controller.setQuery("first query");
    const first = controller.runSearch();
    controller.setQuery("second query");
    const second = controller.runSearch();

    expect(pending.length).toBe(2);
    expect(pending[0]!.aborted()).toBe(true);
    expect(pending[1]!.aborted()).toBe(false);

    pending[0]!.rejectAsAborted();
    pending[1]!.resolveWith(diversifiedFixture as RecordedFixture);
    await Promise.all([first, second]);

    expect(controller.state.rows.map((row) => row.id)).toEqual(diversifiedIds);
    expect(controller.state.completedQuery).toBe("second query");
    expect(controller.state.banner).toBeNull();
    expect(controller.state.searchInFlight).toBe(false);
  });

  it("ignores a stale response even if it arrives after the newer one", async () => {
    const { fetchFn, pending } = deferredFetch();
    const controller = new ConsoleController(new GatewayClient("", fetchFn));

    controller.setQuery("first query");
    const first = controller.runSearch();
    controller.setQuery("second query");
    const second = controller.runSearch();

    // Newer response lands first; the older transport never honors its abort
    // signal and later "succeeds" anyway. Its payload must be discarded.
    pending[1]!.resolveWith(diversifiedFixture as RecordedFixture);
    await second;
    pending[0]!.resolveWith(relevanceFixture as RecordedFixture);
    await first;

    expect(controller.state.rows.map((row) => row.id)).toEqual(diversifiedIds);
    expect(controller.state.completedQuery).toBe("second query");
    expect(controller.state.searchInFlight).toBe(false);
  });

  it("keeps selection across searches while the selected id persists", async () => {
    const { fetchFn, pending } = deferredFetch();
    const controller = new ConsoleController(new GatewayClient("", fetchFn));

    controller.setQuery("chest pain emergency");
    const first = controller.runSearch();
    pending[0]!.resolveWith(relevanceFixture as RecordedFixture);
    await first;
    controller.selectCase("card-002"); // present in both result sets

    const second = controller.runSearch();
    pending[1]!.resolveWith(diversifiedFixture as RecordedFixture);
    await second;

    expect(controller.state.selectedId).toBe("card-002");
  });

  it("clears selection when the selected id drops out of the results", async () => {
    const { fetchFn, pending } = deferredFetch();
    const controller = new ConsoleController(new GatewayClient("", fetchFn));

    controller.setQuery("chest pain emergency");
    const first = controller.runSearch();
    pending[0]!.resolveWith(relevanceFixture as RecordedFixture);
    await first;
    controller.selectCase("card-006"); // absent from the diversified set

    const second = controller.runSearch();
    pending[1]!.resolveWith(diversifiedFixture as RecordedFixture);
    await second;

    expect(controller.state.selectedId).toBeNull();
  });
});

describe("insight lifecycle", () => {
  async function searchedController(extra: RecordedFixture[]) {
    const { controller, calls } = makeController([
      relevanceFixture as RecordedFixture,
      ...extra,
    ]);
    controller.setQuery("chest pain emergency");
    await controller.runSearch();
    return { controller, calls };
  }

  it("is unavailable before any completed search", async () => {
    const { controller, calls } = makeController([
      groundedFixture as RecordedFixture,
    ]);
    expect(controller.canRequestInsight()).toBe(false);
    await controller.runInsight();
    expect(calls.length).toBe(0);
    expect(controller.state.insight).toBeNull();
  });

  it("stores the report returned for the completed query", async () => {
    const { controller, calls } = await searchedController([
      groundedFixture as RecordedFixture,
    ]);
    expect(controller.canRequestInsight()).toBe(true);
    await controller.runInsight();

    expect(calls.length).toBe(2);
    expect(calls[1]!.url).toBe("/v1/insights");
    expect((calls[1]!.body as Record<string, unknown>).query).toBe(
      "chest pain emergency",
    );
    expect(controller.state.insight).toEqual(
      groundedFixture.response as InsightResponse,
    );
    expect(controller.state.insightInFlight).toBe(false);
    expect(controller.state.banner).toBeNull();
  });

  it("maps an overloaded generation backend to its dedicated banner, keeping results", async () => {
    const { controller, calls } = await searchedController([
      error503Fixture as RecordedFixture,
    ]);
    await controller.runInsight();

    expect(calls.length).toBe(2); // exactly one insight attempt, no retry
    expect(controller.state.banner).toEqual({
      kind: "error",
      text: "generation backend unavailable",
    });
    expect(controller.state.rows.map((row) => row.id)).toEqual(relevanceIds);
    expect(controller.state.insight).toBeNull();
    expect(controller.state.insightInFlight).toBe(false);
  });

  it("allows only one insight request in flight", async () => {
    const { fetchFn, pending } = deferredFetch();
    const controller = new ConsoleController(new GatewayClient("", fetchFn));
    controller.setQuery("chest pain emergency");
    const search = controller.runSearch();
    pending[0]!.resolveWith(relevanceFixture as RecordedFixture);
    await search;

    const insight = controller.runInsight();
    expect(controller.state.insightInFlight).toBe(true);
    expect(controller.canRequestInsight()).toBe(false);
    await controller.runInsight(); // guarded no-op
    expect(pending.length).toBe(2); // one search + one insight, not two insights

    pending[1]!.resolveWith(groundedFixture as RecordedFixture);
    await insight;
    expect(controller.state.insight).not.toBeNull();
  });

  it("aborts an in-flight insight when a new search starts", async () => {
    const { fetchFn, pending } = deferredFetch();
    const controller = new ConsoleController(new GatewayClient("", fetchFn));
    controller.setQuery("chest pain emergency");
    const firstSearch = controller.runSearch();
    pending[0]!.resolveWith(relevanceFixture as RecordedFixture);
    await firstSearch;

    const insight = controller.runInsight();
    expect(pending[1]!.url).toBe("/v1/insights");

    controller.setQuery("different question");
    const secondSearch = controller.runSearch();
    expect(pending[1]!.aborted()).toBe(true);
    expect(controller.state.insightInFlight).toBe(false);

    pending[1]!.rejectAsAborted();
    pending[2]!.resolveWith(diversifiedFixture as RecordedFixture);
    await Promise.all([insight, secondSearch]);
    await flushMicrotasks();

    expect(controller.state.banner).toBeNull(); // an aborted insight is not an error
    expect(controller.state.rows.map((row) => row.id)).toEqual(diversifiedIds);
    expect(controller.state.insight).toBeNull();
  });

  it("drops a superseded insight report even if its response still arrives", async () => {
    const { fetchFn, pending } = deferredFetch();
    const controller = new ConsoleController(new GatewayClient("", fetchFn));
    controller.setQuery("chest pain emergency");
    const firstSearch = controller.runSearch();
    pending[0]!.resolveWith(relevanceFixture as RecordedFixture);
    await firstSearch;

    const insight = controller.runInsight();
    controller.setQuery("different question");
    const secondSearch = controller.runSearch();
    pending[2]!.resolveWith(diversifiedFixture as RecordedFixture);
    await secondSearch;

    // The stale insight transport ignores its abort signal and resolves late.
    pending[1]!.resolveWith(groundedFixture as RecordedFixture);
    await insight;

    expect(controller.state.insight).toBeNull();
  });

  it("clears the previous report when new results arrive", async () => {
    const { fetchFn, pending } = deferredFetch();
    const controller = new ConsoleController(new GatewayClient("", fetchFn));
    controller.setQuery("chest pain emergency");
    const firstSearch = controller.runSearch();
    pending[0]!.resolveWith(relevanceFixture as RecordedFixture);
    await firstSearch;

    const insight = controller.runInsight();
    pending[1]!.resolveWith(groundedFixture as RecordedFixture);
    await insight;
    expect(controller.state.insight).not.toBeNull();

    const secondSearch = controller.runSearch();
    pending[2]!.resolveWith(diversifiedFixture as RecordedFixture);
    await secondSearch;

    expect(controller.state.insight).toBeNull();
  });
});
