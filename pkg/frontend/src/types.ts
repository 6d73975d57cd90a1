// Wire and UI state types for the gateway chat client.

export type Role = "user" | "assistant";

export interface Turn {
  role: Role;
  content: string;
  warnings: string[];
  blocked: boolean;
}

/** Lives only in page memory; never touches any browser storage API. */
export interface Transcript {
  turns: Turn[];
  pending: boolean;
  /** Inline, retryable error from the last send attempt (null when clean). */
  error: string | null;
}

export interface UiConfig {
  gatewayBaseUrl: string;
  disclosureBanner: string;
  crisisFooter: string;
  preSendNotice: string;
}

/** Exactly the fields the gateway accepts; nothing else may be attached. */
export interface ChatRequestBody {
  message: string;
  history: { role: Role; content: string }[];
  max_tokens: number;
}

export interface ChatResponseBody {
  reply: string;
  latency_ms: number;
  warnings: string[];
  disclosure: string;
  blocked: boolean;
}
