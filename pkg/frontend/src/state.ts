/** Pure derivation of UI messages from the service's session resource.
 *
 * The chat holds no truth of its own: after any interaction the rendered
 * transcript equals `messagesFromSession(GET /v1/sessions/{id})`. File
 * names for citation chips come from a cosmetic lookup harvested from
 * query responses, falling back to the chunk id's document prefix.
 */

import type {
  Citation,
  FeedbackState,
  SessionResource,
  SessionTurn,
  UiMessage,
} from "./types.js";

export function fileNameForChunk(chunkId: string, known: Map<string, string>): string {
  return known.get(chunkId) ?? chunkId.split("/")[0] ?? chunkId;
}

export function citationsFor(turn: SessionTurn, known: Map<string, string>): Citation[] {
  return turn.citations.map((chunkId) => ({
    chunkId,
    fileName: fileNameForChunk(chunkId, known),
  }));
}

/** A down-voted turn counts as retried when a later reformulated turn
 * answers the same user query (how the engine records retries). */
export function feedbackStateFor(
  turn: SessionTurn,
  index: number,
  turns: SessionTurn[],
  retryBudgetUsed: number,
): FeedbackState {
  if (turn.feedback === "up") return "up";
  if (turn.feedback !== "down") return "none";
  const retried = turns
    .slice(index + 1)
    .some((later) => later.reformulated && later.query === turn.query);
  if (retried) return "retried";
  return retryBudgetUsed >= 3 ? "budget_exhausted" : "down";
}

/** Retry turns re-answer an earlier down-voted query; the user never
 * typed them, so they render without a user bubble. */
export function isRetryTurn(turn: SessionTurn, index: number, turns: SessionTurn[]): boolean {
  if (!turn.reformulated) return false;
  return turns
    .slice(0, index)
    .some((earlier) => earlier.feedback === "down" && earlier.query === turn.query);
}

export function messagesFromSession(
  resource: SessionResource,
  known: Map<string, string> = new Map(),
): UiMessage[] {
  const messages: UiMessage[] = [];
  resource.turns.forEach((turn, index) => {
    if (!isRetryTurn(turn, index, resource.turns)) {
      messages.push({
        role: "user",
        text: turn.query,
        citations: [],
        reformulated: false,
        feedbackState: "none",
      });
    }
    messages.push({
      role: "assistant",
      text: turn.answer_text,
      citations: citationsFor(turn, known),
      turnId: turn.turn_id,
      reformulated: turn.reformulated,
      feedbackState: feedbackStateFor(turn, index, resource.turns, resource.retry_budget_used),
    });
  });
  return messages;
}

/** Split a grounded answer into bullet lines and plain lines, preserving
 * the generator's bullet formatting. */
export function answerLines(text: string): { bullets: string[]; plain: string[] } {
  const bullets: string[] = [];
  const plain: string[] = [];
  for (const raw of text.split("\n")) {
    const line = raw.trim();
    if (!line) continue;
    if (line.startsWith("- ") || line.startsWith("* ")) {
      bullets.push(line.slice(2).trim());
    } else {
      plain.push(line);
    }
  }
  return { bullets, plain };
}
