/** In-memory stand-in for the mock-mode /v1 server, mirroring its
 * contract: deterministic grounded answers, 10-turn windows, and the
 * 3-retry feedback budget. Returns fetch-compatible responses so it can
 * be injected straight into ApiClient. */

import type { SessionTurn } from "../src/types.js";

interface SessionState {
  created_at: string;
  turns: SessionTurn[];
  retryBudgetUsed: number;
}

interface PlannedFailure {
  status: number;
  code: string;
  message: string;
  stage?: string;
}

function jsonResponse(status: number, body: unknown): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: async () => body,
  } as unknown as Response;
}

export class StubServer {
  sessions = new Map<string, SessionState>();
  failNextQuery: PlannedFailure | null = null;
  queryDelay: Promise<void> | null = null;

  fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    const url = new URL(input, "http://stub.local");
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : {};

    if (method === "POST" && url.pathname === "/v1/query") {
      if (this.queryDelay) await this.queryDelay;
      if (this.failNextQuery) {
        const failure = this.failNextQuery;
        this.failNextQuery = null;
        return jsonResponse(failure.status, failure);
      }
      return this.handleQuery(body.session_id, body.query);
    }
    if (method === "POST" && url.pathname === "/v1/feedback") {
      return this.handleFeedback(body.session_id, body.turn_id, body.verdict);
    }
    if (method === "GET" && url.pathname.startsWith("/v1/sessions/")) {
      const sessionId = decodeURIComponent(url.pathname.split("/").pop() ?? "");
      const session = this.sessions.get(sessionId);
      if (!session) {
        return jsonResponse(404, { code: "not_found", message: `unknown session: ${sessionId}` });
      }
      return jsonResponse(200, {
        session_id: sessionId,
        created_at: session.created_at,
        retry_budget_used: session.retryBudgetUsed,
        turns: session.turns.slice(-10),
      });
    }
    return jsonResponse(404, { code: "not_found", message: `no route ${method} ${url.pathname}` });
  };

  private ensure(sessionId: string): SessionState {
    let session = this.sessions.get(sessionId);
    if (!session) {
      session = { created_at: new Date().toISOString(), turns: [], retryBudgetUsed: 0 };
      this.sessions.set(sessionId, session);
    }
    return session;
  }

  private answerFor(sessionId: string, query: string, finalQuery: string, reformulated: boolean) {
    const session = this.ensure(sessionId);
    const turnId = `t${session.turns.length + 1}`;
    const citations = ["leave_policy.md/text/0", "headcount.json/headcount/r2"];
    const answerText =
      `- Grounded fact about ${finalQuery}. [${citations[0]}]\n` +
      `- Supporting row detail. [${citations[1]}]`;
    const turn: SessionTurn = {
      turn_id: turnId,
      query,
      final_query: finalQuery,
      answer_text: answerText,
      citations,
      feedback: null,
      reformulated,
    };
    session.turns.push(turn);
    return {
      session_id: sessionId,
      turn_id: turnId,
      answer_text: answerText,
      citations,
      used_chunks: citations,
      summary: null,
      reformulated,
      final_query: finalQuery,
      sources: [
        { chunk_id: citations[0], file_name: "leave_policy.md", fused: 1.0, rerank: 0.8 },
        { chunk_id: citations[1], file_name: "headcount.json", fused: 0.7, rerank: 0.5 },
      ],
    };
  }

  private handleQuery(sessionId: string, query: string): Response {
    return jsonResponse(200, this.answerFor(sessionId, query, query, false));
  }

  private handleFeedback(sessionId: string, turnId: string, verdict: string): Response {
    const session = this.sessions.get(sessionId);
    const turn = session?.turns.find((t) => t.turn_id === turnId);
    if (!session || !turn) {
      return jsonResponse(404, { code: "not_found", message: `unknown turn: ${turnId}` });
    }
    turn.feedback = verdict as "up" | "down";
    if (verdict === "up") {
      return jsonResponse(200, { retried: false, budget_exhausted: false });
    }
    if (session.retryBudgetUsed >= 3) {
      return jsonResponse(200, { retried: false, budget_exhausted: true });
    }
    session.retryBudgetUsed += 1;
    const newAnswer = this.answerFor(sessionId, turn.query, `${turn.final_query} refined`, true);
    return jsonResponse(200, { retried: true, budget_exhausted: false, new_answer: newAnswer });
  }
}
