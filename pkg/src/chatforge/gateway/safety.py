"""Content safety checks: blocklist, trigger warnings, fixed safety texts."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

DISCLOSURE = (
    "You're chatting with an AI support assistant, not a human therapist. "
    "It can make mistakes and is not a substitute for professional care."
)

SAFE_REFUSAL = (
    "I can't help with that. If you are in crisis or thinking about harming "
    "yourself or someone else, please reach out right now: call or text 988 "
    "(Suicide & Crisis Lifeline, US), dial your local emergency number, or "
    "find international helplines at befrienders.org."
)

CRISIS_FOOTER = (
    "If you are in crisis, you deserve immediate support: call or text 988 (US), "
    "dial your local emergency number, or find helplines at befrienders.org."
)

EMPTY_REPLY_FALLBACK = (
    "I'm not able to respond to that right now. Could you share a little more "
    "about what's on your mind?"
)

_TOKEN_RE = re.compile(r"[\w'-]+")


@dataclass
class SafetyVerdict:
    action: str  # "pass" | "warn" | "block"
    tags: list[str] = field(default_factory=list)
    #: matched terms stay in-process for debugging assertions; never logged
    matched_terms: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.action not in ("pass", "warn", "block"):
            raise ValueError(f"unknown action {self.action!r}")
        if self.action == "block" and not self.matched_terms:
            raise ValueError("block requires at least one matched term")
        if self.action == "warn" and not self.tags:
            raise ValueError("warn requires at least one tag")

    @property
    def blocked(self) -> bool:
        return self.action == "block"


def _words(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def safety_check(
    text: str, blocklist: frozenset[str], trigger_lexicon: dict[str, str]
) -> SafetyVerdict:
    """Case-insensitive whole-token matching against both lexicons.

    Any blocklist hit blocks; otherwise trigger hits warn with one tag per
    matched category. Applied to inbound user messages and outbound model
    replies alike.
    """
    words = _words(text)
    blocked = sorted({w for w in words if w in blocklist})
    if blocked:
        return SafetyVerdict(action="block", matched_terms=blocked)
    categories: dict[str, list[str]] = {}
    for word in words:
        category = trigger_lexicon.get(word)
        if category is not None:
            categories.setdefault(category, []).append(word)
    if categories:
        tags = sorted(categories)
        matched = sorted({w for ws in categories.values() for w in ws})
        return SafetyVerdict(action="warn", tags=tags, matched_terms=matched)
    return SafetyVerdict(action="pass")
