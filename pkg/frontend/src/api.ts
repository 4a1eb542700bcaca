/** Thin fetch client for the /v1 JSON API (the UI's only backend coupling). */

import type { FeedbackResponse, QueryResponse, SessionResource, Verdict } from "./types.js";

export class ApiError extends Error {
  status: number;
  code: string;
  stage?: string;

  constructor(status: number, code: string, message: string, stage?: string) {
    super(message);
    this.status = status;
    this.code = code;
    this.stage = stage;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private baseUrl: string;
  private fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn: FetchLike = (...args) => fetch(...args)) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(`${this.baseUrl}${path}`, {
        method,
        headers: body === undefined ? undefined : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, "unreachable", `service unreachable: ${String(err)}`);
    }
    if (!resp.ok) {
      let code = "internal";
      let message = `HTTP ${resp.status}`;
      let stage: string | undefined;
      try {
        const detail = await resp.json();
        code = detail.code ?? code;
        message = detail.message ?? message;
        stage = detail.stage;
      } catch {
        // non-JSON error body; keep the HTTP status message
      }
      throw new ApiError(resp.status, code, message, stage);
    }
    return (await resp.json()) as T;
  }

  query(sessionId: string, query: string, profile: string): Promise<QueryResponse> {
    return this.request("POST", "/v1/query", { session_id: sessionId, query, profile });
  }

  feedback(sessionId: string, turnId: string, verdict: Verdict): Promise<FeedbackResponse> {
    return this.request("POST", "/v1/feedback", {
      session_id: sessionId,
      turn_id: turnId,
      verdict,
    });
  }

  session(sessionId: string): Promise<SessionResource> {
    return this.request("GET", `/v1/sessions/${encodeURIComponent(sessionId)}`);
  }
}
