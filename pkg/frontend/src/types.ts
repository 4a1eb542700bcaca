/** Wire types for the /v1 API plus the derived UI message model. */

export type Verdict = "up" | "down";

export type FeedbackState = "none" | "up" | "down" | "retried" | "budget_exhausted";

export interface SourceRef {
  chunk_id: string;
  file_name: string;
  fused: number;
  rerank: number | null;
}

export interface QueryResponse {
  session_id: string;
  turn_id: string;
  answer_text: string;
  citations: string[];
  used_chunks: string[];
  summary: string | null;
  reformulated: boolean;
  final_query: string;
  sources: SourceRef[];
}

export interface FeedbackResponse {
  retried: boolean;
  budget_exhausted: boolean;
  new_answer?: QueryResponse;
}

/** One turn exactly as the session resource stores it. */
export interface SessionTurn {
  turn_id: string;
  query: string;
  final_query: string;
  answer_text: string;
  citations: string[];
  feedback: Verdict | null;
  reformulated: boolean;
}

export interface SessionResource {
  session_id: string;
  created_at: string;
  retry_budget_used: number;
  turns: SessionTurn[];
}

export interface Citation {
  chunkId: string;
  fileName: string;
}

export interface UiMessage {
  role: "user" | "assistant";
  text: string;
  citations: Citation[];
  turnId?: string;
  reformulated: boolean;
  feedbackState: FeedbackState;
}
