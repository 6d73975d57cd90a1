// Browser bootstrap: wires the pure modules to the DOM. One in-flight
// request at a time; the transcript never leaves page memory.

import { GatewayClient, GatewayError } from "./client.js";
import { resolveConfig } from "./config.js";
import { assertBrowserStorageEmpty } from "./storage.js";
import {
  beginRetry,
  beginSend,
  canSend,
  completeSend,
  emptyTranscript,
  failSend,
  requestBody,
} from "./transcript.js";
import type { Transcript, UiConfig } from "./types.js";
import { renderShell, renderTranscript } from "./view.js";

declare global {
  interface Window {
    CHATFORGE_CONFIG?: Partial<UiConfig>;
  }
}

function boot(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const config = resolveConfig(window.CHATFORGE_CONFIG ?? {});
  const client = new GatewayClient(config.gatewayBaseUrl);
  let transcript: Transcript = emptyTranscript();

  const paint = () => {
    const region = document.getElementById("transcript");
    if (region) region.innerHTML = renderTranscript(transcript);
    const input = document.getElementById("message") as HTMLInputElement | null;
    const send = document.getElementById("send") as HTMLButtonElement | null;
    if (input) input.disabled = transcript.pending;
    if (send) send.disabled = transcript.pending || !(input && input.value.trim());
    const retry = document.getElementById("retry");
    if (retry) retry.addEventListener("click", () => void dispatch(beginRetry(transcript)));
    region?.scrollTo(0, region.scrollHeight);
  };

  const dispatch = async (next: Transcript): Promise<void> => {
    transcript = next;
    paint();
    try {
      const response = await client.chat(requestBody(transcript));
      transcript = completeSend(transcript, response);
    } catch (error) {
      const message =
        error instanceof GatewayError ? error.message : "unexpected error sending message";
      transcript = failSend(transcript, message);
    }
    paint();
    assertBrowserStorageEmpty();
  };

  const renderAll = (reachable: boolean) => {
    root.innerHTML = renderShell(config, reachable);
    const form = document.getElementById("composer") as HTMLFormElement;
    const input = document.getElementById("message") as HTMLInputElement;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      if (!canSend(transcript, input.value)) return;
      const text = input.value;
      input.value = "";
      void dispatch(beginSend(transcript, text));
    });
    input.addEventListener("input", paint);
    paint();
  };

  renderAll(true);
  void client.healthy().then((ok) => {
    if (!ok) renderAll(false);
  });
}

if (typeof document !== "undefined") {
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", boot);
  } else {
    boot();
  }
}
