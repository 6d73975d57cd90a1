import { describe, expect, it } from "vitest";

import { GatewayClient, GatewayError } from "../src/client.js";
import type { ChatRequestBody } from "../src/types.js";

const body: ChatRequestBody = { message: "hi", history: [], max_tokens: 256 };

function jsonResponse(status: number, payload: unknown): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("GatewayClient", () => {
  it("POSTs the exact body to /v1/chat and parses the reply", async () => {
    const seen: { url?: string; init?: RequestInit } = {};
    const client = new GatewayClient("http://gw", async (url, init) => {
      seen.url = url;
      seen.init = init;
      return jsonResponse(200, {
        reply: "hello",
        latency_ms: 2,
        warnings: [],
        disclosure: "d",
        blocked: false,
      });
    });
    const response = await client.chat(body);
    expect(response.reply).toBe("hello");
    expect(seen.url).toBe("http://gw/v1/chat");
    expect(seen.init?.method).toBe("POST");
    expect(JSON.parse(String(seen.init?.body))).toEqual(body);
  });

  it("maps 5xx to a retryable error", async () => {
    const client = new GatewayClient("http://gw", async () => jsonResponse(503, {}));
    await expect(client.chat(body)).rejects.toSatisfy(
      (e) => e instanceof GatewayError && e.retryable,
    );
  });

  it("maps 4xx to a non-retryable error carrying the detail", async () => {
    const client = new GatewayClient("http://gw", async () =>
      jsonResponse(400, { error: "invalid_request", detail: "message must be non-empty" }),
    );
    await expect(client.chat(body)).rejects.toThrow(/message must be non-empty/);
    await expect(client.chat(body)).rejects.toSatisfy(
      (e) => e instanceof GatewayError && !e.retryable,
    );
  });

  it("maps network failures to retryable errors", async () => {
    const client = new GatewayClient("http://gw", async () => {
      throw new TypeError("fetch failed");
    });
    await expect(client.chat(body)).rejects.toSatisfy(
      (e) => e instanceof GatewayError && e.retryable,
    );
  });

  it("healthy() is false when the gateway is down", async () => {
    const down = new GatewayClient("http://gw", async () => {
      throw new TypeError("fetch failed");
    });
    expect(await down.healthy()).toBe(false);
    const up = new GatewayClient("http://gw", async () => jsonResponse(200, { status: "ok" }));
    expect(await up.healthy()).toBe(true);
  });
});
