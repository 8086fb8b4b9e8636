/** Test doubles built on the recorded gateway fixtures.
 *
 * `recordedFetch` replays fixture responses by route; `deferredFetch` hands
 * the test manual control over each request's resolution so supersession
 * and stale-response rules can be exercised deterministically.
 */

export interface RecordedFixture<TResponse = unknown> {
  route: string;
  method: string;
  request_body: Record<string, unknown> | null;
  status: number;
  response: TResponse;
}

export interface FetchCall {
  url: string;
  method: string;
  body: unknown;
  signal: AbortSignal | undefined;
}

function toResponse(fixture: RecordedFixture): Response {
  return new Response(JSON.stringify(fixture.response), {
    status: fixture.status,
    headers: { "content-type": "application/json" },
  });
}

/** Serve each route from its recorded fixture; unknown routes reject. */
export function recordedFetch(fixtures: RecordedFixture[]): {
  fetchFn: typeof fetch;
  calls: FetchCall[];
} {
  const calls: FetchCall[] = [];
  const fetchFn = async (
    input: RequestInfo | URL,
    init?: RequestInit,
  ): Promise<Response> => {
    const url = String(input);
    calls.push({
      url,
      method: init?.method ?? "GET",
      body: typeof init?.body === "string" ? JSON.parse(init.body) : null,
      signal: init?.signal ?? undefined,
    });
    const fixture = fixtures.find((candidate) => url.endsWith(candidate.route));
    if (!fixture) {
      throw new TypeError(`no recorded fixture for ${url}`);
    }
    return toResponse(fixture);
  };
  return { fetchFn: fetchFn as typeof fetch, calls };
}

export interface PendingRequest {
  url: string;
  body: unknown;
  signal: AbortSignal | undefined;
  aborted: () => boolean;
  resolveWith: (fixture: RecordedFixture) => void;
  rejectWith: (error: unknown) => void;
  /** Reject the way real fetch does when its signal aborts. */
  rejectAsAborted: () => void;
}

/** Every request parks until the test resolves it explicitly. */
export function deferredFetch(): {
  fetchFn: typeof fetch;
  pending: PendingRequest[];
} {
  const pending: PendingRequest[] = [];
  const fetchFn = (
    input: RequestInfo | URL,
    init?: RequestInit,
  ): Promise<Response> => {
    return new Promise<Response>((resolve, reject) => {
      const signal = init?.signal ?? undefined;
      pending.push({
        url: String(input),
        body: typeof init?.body === "string" ? JSON.parse(init.body) : null,
        signal,
        aborted: () => signal?.aborted ?? false,
        resolveWith: (fixture) => resolve(toResponse(fixture)),
        rejectWith: (error) => reject(error),
        rejectAsAborted: () =>
          reject(new DOMException("The operation was aborted.", "AbortError")),
      });
    });
  };
  return { fetchFn: fetchFn as typeof fetch, pending };
}

/** Deep-cloned fixture so tests can mutate payloads safely. */
export function cloneFixture<T>(fixture: RecordedFixture<T>): RecordedFixture<T> {
  return JSON.parse(JSON.stringify(fixture)) as RecordedFixture<T>;
}

export async function flushMicrotasks(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
}
