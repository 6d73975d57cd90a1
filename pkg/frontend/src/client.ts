// Gateway HTTP client: fetch-based, injectable for tests.

import type { ChatRequestBody, ChatResponseBody } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class GatewayError extends Error {
  constructor(message: string, readonly retryable: boolean) {
    super(message);
  }
}

export class GatewayClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async chat(body: ChatRequestBody): Promise<ChatResponseBody> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}/v1/chat`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      });
    } catch {
      throw new GatewayError("network error reaching the gateway", true);
    }
    if (response.status >= 500) {
      throw new GatewayError(`gateway unavailable (${response.status})`, true);
    }
    if (!response.ok) {
      let detail = `request rejected (${response.status})`;
      try {
        const payload = (await response.json()) as { detail?: string };
        if (payload.detail) detail = payload.detail;
      } catch {
        // keep the generic message
      }
      throw new GatewayError(detail, false);
    }
    return (await response.json()) as ChatResponseBody;
  }

  async healthy(): Promise<boolean> {
    try {
      const response = await this.fetchImpl(`${this.baseUrl}/v1/health`);
      return response.ok;
    } catch {
      return false;
    }
  }
}
