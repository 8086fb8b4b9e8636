/** Thin typed client for the /v1 gateway API.
 *
 * Every non-2xx response is surfaced as an ApiError carrying the gateway's
 * machine-readable error code; transport failures and aborts propagate
 * unchanged. The client never retries: callers decide what a failure means.
 */

import type {
  ErrorEnvelope,
  HealthResponse,
  InsightResponse,
  SearchKnobs,
  SearchResponse,
  StatsResponse,
} from "./types";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export function isAbortError(error: unknown): boolean {
  return error instanceof DOMException && error.name === "AbortError";
}

export interface SearchParams extends SearchKnobs {
  query: string;
  jurisdiction?: string;
  now?: string;
}

export class GatewayClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  async search(params: SearchParams, signal?: AbortSignal): Promise<SearchResponse> {
    return this.post<SearchResponse>("/v1/search", this.requestBody(params), signal);
  }

  async insights(params: SearchParams, signal?: AbortSignal): Promise<InsightResponse> {
    return this.post<InsightResponse>(
      "/v1/insights",
      this.requestBody(params),
      signal,
    );
  }

  async stats(): Promise<StatsResponse> {
    return this.get<StatsResponse>("/v1/stats");
  }

  async health(): Promise<HealthResponse> {
    return this.get<HealthResponse>("/v1/health");
  }

  /** The exact JSON body for a search/insight POST with the given knobs. */
  requestBody(params: SearchParams): Record<string, unknown> {
    const body: Record<string, unknown> = {
      query: params.query,
      k: params.k,
      n: params.n,
      mmr_lambda: params.mmr_lambda,
      w_similarity: params.w_similarity,
      w_recency: params.w_recency,
      w_citation: params.w_citation,
      w_jurisdiction: params.w_jurisdiction,
    };
    if (params.jurisdiction !== undefined) body.jurisdiction = params.jurisdiction;
    if (params.now !== undefined) body.now = params.now;
    return body;
  }

  private async post<T>(
    route: string,
    body: Record<string, unknown>,
    signal?: AbortSignal,
  ): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + route, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    return this.decode<T>(response);
  }

  private async get<T>(route: string): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + route);
    return this.decode<T>(response);
  }

  private async decode<T>(response: Response): Promise<T> {
    if (response.ok) {
      return (await response.json()) as T;
    }
    let code = "http_error";
    let message = `request failed with status ${response.status}`;
    try {
      const envelope = (await response.json()) as ErrorEnvelope;
      if (envelope && envelope.error) {
        code = envelope.error.code;
        message = envelope.error.message;
      }
    } catch {
      // body was not the error envelope; keep the generic message
    }
    throw new ApiError(response.status, code, message);
  }
}
