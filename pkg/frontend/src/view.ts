// HTML renderers. Pure string-in/string-out so every UI state is testable
// without a DOM; main.ts assigns the results into the page.

import type { Transcript, Turn, UiConfig } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function renderWarnings(warnings: string[]): string {
  if (warnings.length === 0) return "";
  const badges = warnings
    .map((tag) => `<span class="warning-badge">${escapeHtml(tag)}</span>`)
    .join("");
  return `<div class="warnings" role="note">Content notes: ${badges}</div>`;
}

export function renderTurn(turn: Turn): string {
  const classes = ["turn", turn.role, turn.blocked ? "blocked" : ""].filter(Boolean).join(" ");
  // warning banners render above the reply text
  return (
    `<div class="${classes}">` +
    (turn.role === "assistant" ? renderWarnings(turn.warnings) : "") +
    `<div class="bubble">${escapeHtml(turn.content)}</div>` +
    `</div>`
  );
}

export function renderTranscript(transcript: Transcript): string {
  const turns = transcript.turns.map(renderTurn).join("");
  const pending = transcript.pending
    ? `<div class="turn assistant pending"><div class="bubble">&hellip;</div></div>`
    : "";
  const error = transcript.error
    ? `<div class="turn error"><div class="bubble">${escapeHtml(transcript.error)}</div>` +
      `<button id="retry" type="button">Retry</button></div>`
    : "";
  return turns + pending + error;
}

/**
 * The page shell. The disclosure banner and the crisis footer are part of
 * the shell itself, so they are visible in every state the app can render;
 * the transcript region is re-rendered into #transcript.
 */
export function renderShell(config: UiConfig, gatewayReachable: boolean): string {
  const connectivity = gatewayReachable
    ? ""
    : `<div id="connectivity" class="notice">Can't reach the assistant right now; ` +
      `your message will be retryable.</div>`;
  return `
<header>
  <div id="disclosure" class="banner" role="note">${escapeHtml(config.disclosureBanner)}</div>
</header>
<main>
  <div id="pre-send-notice" class="notice">${escapeHtml(config.preSendNotice)}</div>
  ${connectivity}
  <div id="transcript" aria-live="polite"></div>
</main>
<footer>
  <div id="crisis-footer" class="footer-note">${escapeHtml(config.crisisFooter)}</div>
  <form id="composer">
    <input id="message" type="text" autocomplete="off"
           placeholder="Type a message" aria-label="Message" />
    <button id="send" type="submit">Send</button>
  </form>
</footer>`;
}
