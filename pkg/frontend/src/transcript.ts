// Pure transcript state transitions. One in-flight request at a time; a
// failed send keeps the user turn so it can be retried without re-typing.

import type { ChatRequestBody, ChatResponseBody, Transcript, Turn } from "./types.js";

export function emptyTranscript(): Transcript {
  return { turns: [], pending: false, error: null };
}

export function canSend(transcript: Transcript, text: string): boolean {
  return !transcript.pending && text.trim().length > 0;
}

/** Append the user turn and mark the request in flight. */
export function beginSend(transcript: Transcript, text: string): Transcript {
  const trimmed = text.trim();
  if (!canSend(transcript, text)) {
    throw new Error(transcript.pending ? "a request is already pending" : "empty message");
  }
  const turn: Turn = { role: "user", content: trimmed, warnings: [], blocked: false };
  return { turns: [...transcript.turns, turn], pending: true, error: null };
}

/** Re-enter the pending state for the retained, un-answered user turn. */
export function beginRetry(transcript: Transcript): Transcript {
  const last = transcript.turns[transcript.turns.length - 1];
  if (transcript.pending || transcript.error === null || !last || last.role !== "user") {
    throw new Error("nothing to retry");
  }
  return { ...transcript, pending: true, error: null };
}

export function completeSend(transcript: Transcript, response: ChatResponseBody): Transcript {
  const turn: Turn = {
    role: "assistant",
    content: response.reply,
    warnings: [...response.warnings],
    blocked: response.blocked,
  };
  return { turns: [...transcript.turns, turn], pending: false, error: null };
}

export function failSend(transcript: Transcript, message: string): Transcript {
  return { ...transcript, pending: false, error: message };
}

/**
 * The wire body for the in-flight message: the trailing user turn is the
 * message, everything before it is the alternating history. Exactly the
 * typed fields, nothing else.
 */
export function requestBody(transcript: Transcript, maxTokens = 256): ChatRequestBody {
  const last = transcript.turns[transcript.turns.length - 1];
  if (!last || last.role !== "user") {
    throw new Error("no outgoing user turn");
  }
  return {
    message: last.content,
    history: transcript.turns
      .slice(0, -1)
      .map((turn) => ({ role: turn.role, content: turn.content })),
    max_tokens: maxTokens,
  };
}
