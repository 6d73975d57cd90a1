"""Request validation plus prompt rendering and reply post-processing."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .safety import CRISIS_FOOTER, DISCLOSURE, EMPTY_REPLY_FALLBACK, SAFE_REFUSAL


class ValidationError(Exception):
    """Maps to HTTP 400."""


class PromptTooLong(Exception):
    """Maps to HTTP 413: message alone exceeds the prompt cap."""


@dataclass
class ChatRequest:
    message: str
    history: list[dict] = field(default_factory=list)
    max_tokens: int = 256


@dataclass
class ChatResponse:
    reply: str
    latency_ms: int
    warnings: list[str]
    disclosure: str = DISCLOSURE
    blocked: bool = False

    def to_dict(self) -> dict:
        return {
            "reply": self.reply,
            "latency_ms": self.latency_ms,
            "warnings": self.warnings,
            "disclosure": self.disclosure,
            "blocked": self.blocked,
        }


def parse_chat_request(body: object) -> ChatRequest:
    """Validate the wire object; raises ValidationError on any violation."""
    if not isinstance(body, dict):
        raise ValidationError("request body must be a JSON object")
    message = body.get("message")
    if not isinstance(message, str) or not message.strip():
        raise ValidationError("message must be a non-empty string")
    history = body.get("history", [])
    if not isinstance(history, list):
        raise ValidationError("history must be a list")
    for i, turn in enumerate(history):
        if not isinstance(turn, dict) or not isinstance(turn.get("content"), str):
            raise ValidationError(f"history[{i}] must be an object with string content")
        role = turn.get("role")
        if role not in ("user", "assistant"):
            raise ValidationError(f"history[{i}].role must be 'user' or 'assistant'")
        expected = "user" if i % 2 == 0 else "assistant"
        if role != expected:
            raise ValidationError("history roles must alternate starting from user")
    max_tokens = body.get("max_tokens", 256)
    if not isinstance(max_tokens, int) or isinstance(max_tokens, bool) or max_tokens < 1:
        raise ValidationError("max_tokens must be a positive integer")
    return ChatRequest(message=message.strip(), history=list(history), max_tokens=max_tokens)


SYSTEM_PREAMBLE = (
    "<system>You are a supportive mental-wellness assistant. "
    + DISCLOSURE
    + " Be warm and non-judgmental, keep replies grounded and practical, and "
    "encourage reaching out to a licensed professional for serious or ongoing "
    "concerns. Never provide instructions that could cause harm.</system>"
)


def preprocess_prompt(req: ChatRequest, template_preamble: str = SYSTEM_PREAMBLE, cap: int = 4000) -> str:
    """Render the deterministic model prompt.

    The system preamble, then history turns tagged by role, then the new
    user message. When the result exceeds ``cap`` characters the oldest
    history turns are dropped first; the new message is never dropped. If
    the capped render still exceeds the cap with no history left,
    PromptTooLong is raised.
    """
    def render(turns: list[dict]) -> str:
        lines = [template_preamble]
        for turn in turns:
            tag = "User" if turn["role"] == "user" else "Assistant"
            lines.append(f"{tag}: {turn['content']}")
        lines.append(f"User: {req.message}")
        lines.append("Assistant:")
        return "\n".join(lines)

    history = list(req.history)
    prompt = render(history)
    while len(prompt) > cap and history:
        history = history[1:]
        prompt = render(history)
    if len(prompt) > cap:
        raise PromptTooLong(f"prompt is {len(prompt)} characters, cap is {cap}")
    return prompt


_LEADING_ROLE_RE = re.compile(r"^\s*(assistant|bot|system)\s*:\s*", re.IGNORECASE)
_SENTENCE_END_RE = re.compile(r"[.!?](?=\s|$)")


def _truncate_to_sentence(text: str, max_words: int) -> str:
    words = text.split()
    if len(words) <= max_words:
        return text
    clipped = " ".join(words[:max_words])
    ends = list(_SENTENCE_END_RE.finditer(clipped))
    if ends:
        return clipped[: ends[-1].end()]
    return clipped


def postprocess_reply(
    raw: str,
    warnings: list[str],
    blocked: bool,
    max_tokens: int = 256,
) -> tuple[str, list[str]]:
    """Clean the backend text into the final reply.

    Strips a leading role tag, trims whitespace, truncates at the last
    sentence boundary within ``max_tokens`` words, substitutes the fixed
    refusal when blocked and the fixed fallback when empty, and appends the
    crisis-resources footer whenever the "crisis" tag is present (crisis
    content warns, never blocks).
    """
    warnings = sorted(set(warnings))
    if blocked:
        return SAFE_REFUSAL, warnings
    reply = _LEADING_ROLE_RE.sub("", raw or "").strip()
    reply = _truncate_to_sentence(reply, max_tokens)
    if not reply:
        reply = EMPTY_REPLY_FALLBACK
    if "crisis" in warnings and CRISIS_FOOTER not in reply:
        reply = f"{reply}\n\n{CRISIS_FOOTER}"
    return reply, warnings
