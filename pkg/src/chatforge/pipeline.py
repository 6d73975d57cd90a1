"""Deterministic corpus pipeline: anonymize, normalize, tokenize, filter.

Raw conversational records stream in as JSONL and come out as clean,
PII-free training pairs plus a stats document. Every step is a pure
per-record function, so records could be processed in parallel as long as
output order matches input order.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional

SOURCES = ("kaggle", "hf", "reddit", "twitter", "apa")

PII_CLASSES = ("EMAIL", "PHONE", "URL", "HANDLE", "USERNAME", "NUMBER_ID")

#: Ordered by priority; earlier rules win on overlapping matches.
DEFAULT_PII_RULES: list[tuple[str, str]] = [
    (r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}", "EMAIL"),
    (r"(?:https?://|www\.)\S+", "URL"),
    (r"\+?\d(?:[\s().-]?\d){6,}", "PHONE"),
    (r"@\w+", "HANDLE"),
    (r"\bu/\w[\w-]*", "USERNAME"),
    (r"\b\d{6,}\b", "NUMBER_ID"),
]

DROP_REASONS = ("PARSE_ERROR", "TOO_SHORT", "OFFENSIVE", "EMPTY_SIDE")

_MARKER_RE = re.compile(r"\[REDACTED:[A-Z_]+\]")
_WS_RE = re.compile(r"\s+")


class ConfigError(Exception):
    """Bad pipeline configuration (malformed pattern, unreadable lexicon)."""


class PipelineIOError(Exception):
    """Fatal input failure; carries the 1-based line number reached."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"{message} (line {line_no})")
        self.line_no = line_no


@dataclass
class RawRecord:
    id: str
    source: str
    prompt: str
    response: str


@dataclass
class ConversationPair:
    id: str
    source: str
    prompt_tokens: list[str]
    response_tokens: list[str]
    prompt_text: str
    response_text: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "source": self.source,
            "prompt": self.prompt_text,
            "response": self.response_text,
            "prompt_tokens": self.prompt_tokens,
            "response_tokens": self.response_tokens,
        }


@dataclass
class PipelineConfig:
    min_words: int = 10
    max_seq_len: int = 512
    offensive_lexicon: Optional[str | Path] = None
    pii_rules: list[tuple[str, str]] = field(default_factory=lambda: list(DEFAULT_PII_RULES))
    lowercase: bool = True
    strip_nontext: bool = True

    def __post_init__(self):
        if self.min_words < 1:
            raise ConfigError("min_words must be >= 1")
        if self.max_seq_len < 1:
            raise ConfigError("max_seq_len must be >= 1")
        if not self.pii_rules:
            raise ConfigError("pii_rules must be non-empty")


@dataclass
class AnonymizationReport:
    redactions_by_class: Counter = field(default_factory=Counter)
    records_touched: int = 0

    @property
    def total_redactions(self) -> int:
        return sum(self.redactions_by_class.values())


@dataclass
class PipelineStats:
    read: int = 0
    kept: int = 0
    dropped: Counter = field(default_factory=Counter)
    anonymization: AnonymizationReport = field(default_factory=AnonymizationReport)

    def to_dict(self) -> dict:
        return {
            "read": self.read,
            "kept": self.kept,
            "dropped": {reason: self.dropped[reason] for reason in sorted(self.dropped)},
            "redactions": {
                cls: self.anonymization.redactions_by_class[cls]
                for cls in sorted(self.anonymization.redactions_by_class)
            },
            "records_touched": self.anonymization.records_touched,
        }


class Anonymizer:
    """Compiled, priority-ordered PII redaction rules."""

    def __init__(self, rules: Iterable[tuple[str, str]]):
        self.rules: list[tuple[re.Pattern, str]] = []
        for pattern, label in rules:
            try:
                compiled = re.compile(pattern)
            except re.error as exc:
                raise ConfigError(f"bad PII pattern for {label}: {exc}") from exc
            self.rules.append((compiled, label))

    def __call__(self, text: str) -> tuple[str, list[tuple[str, int]]]:
        return self.anonymize(text)

    def anonymize(self, text: str) -> tuple[str, list[tuple[str, int]]]:
        """Replace every rule match with ``[REDACTED:<CLASS>]``.

        Earlier rules win on overlap; existing redaction markers are treated
        as occupied spans, which makes the operation idempotent. Returns the
        masked text and one (class, span length) entry per replacement.
        """
        taken: list[tuple[int, int]] = [m.span() for m in _MARKER_RE.finditer(text)]
        accepted: list[tuple[int, int, str]] = []
        for compiled, label in self.rules:
            for m in compiled.finditer(text):
                start, end = m.span()
                if start == end:
                    continue
                if any(start < t_end and t_start < end for t_start, t_end in taken):
                    continue
                taken.append((start, end))
                accepted.append((start, end, label))
        accepted.sort()
        out = []
        redactions: list[tuple[str, int]] = []
        cursor = 0
        for start, end, label in accepted:
            out.append(text[cursor:start])
            out.append(f"[REDACTED:{label}]")
            redactions.append((label, end - start))
            cursor = end
        out.append(text[cursor:])
        return "".join(out), redactions


def anonymize(text: str, rules: Iterable[tuple[str, str]]) -> tuple[str, list[tuple[str, int]]]:
    return Anonymizer(rules).anonymize(text)


def normalize_text(raw: str, cfg: Optional[PipelineConfig] = None) -> str:
    """Lowercase, keep only letters/digits/whitespace/apostrophes, collapse runs."""
    cfg = cfg or PipelineConfig()
    text = raw.lower() if cfg.lowercase else raw
    if cfg.strip_nontext:
        text = "".join(
            ch for ch in text if ch.isalpha() or ch.isdigit() or ch.isspace() or ch == "'"
        )
    return _WS_RE.sub(" ", text).strip()


def tokenize(text: str) -> list[str]:
    """Maximal non-whitespace runs; joining with single spaces round-trips."""
    return text.split()


def load_lexicon(path: str | Path) -> frozenset[str]:
    """One lowercase term per line; blank lines ignored."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read lexicon {path}: {exc}") from exc
    return frozenset(term.strip().lower() for term in lines if term.strip())


@dataclass
class FilterDecision:
    kept: bool
    reason: Optional[str] = None
    pair: Optional[ConversationPair] = None


def filter_record(
    pair: ConversationPair, cfg: PipelineConfig, lexicon: frozenset[str]
) -> FilterDecision:
    """Keep/drop decision for an already normalized and anonymized pair.

    Over-length token lists are truncated to the first max_seq_len tokens
    rather than dropped; truncation also rewrites the stored text so the
    token/text round-trip invariant survives.
    """
    if len(pair.response_tokens) < cfg.min_words:
        return FilterDecision(kept=False, reason="TOO_SHORT")
    if any(tok.lower() in lexicon for tok in pair.prompt_tokens + pair.response_tokens):
        return FilterDecision(kept=False, reason="OFFENSIVE")
    if not pair.prompt_tokens or not pair.response_tokens:
        return FilterDecision(kept=False, reason="EMPTY_SIDE")
    if len(pair.prompt_tokens) > cfg.max_seq_len:
        pair.prompt_tokens = pair.prompt_tokens[: cfg.max_seq_len]
        pair.prompt_text = " ".join(pair.prompt_tokens)
    if len(pair.response_tokens) > cfg.max_seq_len:
        pair.response_tokens = pair.response_tokens[: cfg.max_seq_len]
        pair.response_text = " ".join(pair.response_tokens)
    return FilterDecision(kept=True, pair=pair)


def _parse_raw_record(line: str, seen_ids: set[str]) -> RawRecord:
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    missing = {"id", "source", "prompt", "response"} - obj.keys()
    if missing:
        raise ValueError(f"missing keys: {sorted(missing)}")
    rec = RawRecord(
        id=obj["id"], source=obj["source"], prompt=obj["prompt"], response=obj["response"]
    )
    if not isinstance(rec.id, str) or not rec.id:
        raise ValueError("id must be a non-empty string")
    if rec.source not in SOURCES:
        raise ValueError(f"unknown source {rec.source!r}")
    if not isinstance(rec.prompt, str) or not isinstance(rec.response, str):
        raise ValueError("prompt and response must be strings")
    if rec.id in seen_ids:
        raise ValueError(f"duplicate id {rec.id!r}")
    seen_ids.add(rec.id)
    return rec


def run_pipeline(
    lines: Iterable[str], cfg: Optional[PipelineConfig] = None
) -> tuple[list[ConversationPair], PipelineStats]:
    """Run anonymize -> normalize -> tokenize -> filter over a JSONL stream.

    Anonymization runs on the raw text before normalization because the
    normalizer strips exactly the punctuation the PII patterns key on.
    Deterministic: the same lines and config always produce the same pairs
    and stats, in input order.
    """
    cfg = cfg or PipelineConfig()
    anonymizer = Anonymizer(cfg.pii_rules)
    lexicon = load_lexicon(cfg.offensive_lexicon) if cfg.offensive_lexicon else frozenset()

    stats = PipelineStats()
    kept: list[ConversationPair] = []
    seen_ids: set[str] = set()
    line_no = 0
    iterator = iter(lines)
    while True:
        try:
            line = next(iterator)
        except StopIteration:
            break
        except OSError as exc:
            raise PipelineIOError(f"input read failed: {exc}", line_no + 1) from exc
        line_no += 1
        if not line.strip():
            continue
        stats.read += 1
        try:
            rec = _parse_raw_record(line, seen_ids)
        except (ValueError, TypeError):
            stats.dropped["PARSE_ERROR"] += 1
            continue

        sides = {}
        touched = False
        for side in ("prompt", "response"):
            masked, redactions = anonymizer.anonymize(getattr(rec, side))
            for label, _span in redactions:
                stats.anonymization.redactions_by_class[label] += 1
            touched = touched or bool(redactions)
            sides[side] = tokenize(normalize_text(masked, cfg))
        if touched:
            stats.anonymization.records_touched += 1

        pair = ConversationPair(
            id=rec.id,
            source=rec.source,
            prompt_tokens=sides["prompt"],
            response_tokens=sides["response"],
            prompt_text=" ".join(sides["prompt"]),
            response_text=" ".join(sides["response"]),
        )
        decision = filter_record(pair, cfg, lexicon)
        if decision.kept:
            stats.kept += 1
            kept.append(decision.pair)
        else:
            stats.dropped[decision.reason] += 1
    return kept, stats


def run_pipeline_file(
    in_path: str | Path, out_path: str | Path, cfg: Optional[PipelineConfig] = None
) -> PipelineStats:
    """File-to-file wrapper: JSONL in, JSONL out, stats returned."""
    in_path = Path(in_path)
    try:
        with in_path.open("r", encoding="utf-8") as handle:
            pairs, stats = run_pipeline(handle, cfg)
    except OSError as exc:
        raise PipelineIOError(f"cannot read {in_path}: {exc}", 0) from exc
    with Path(out_path).open("w", encoding="utf-8") as out:
        for pair in pairs:
            out.write(json.dumps(pair.to_dict()) + "\n")
    return stats


def load_pairs(path: str | Path) -> Iterator[ConversationPair]:
    """Read pipeline output back as ConversationPair records."""
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            obj = json.loads(line)
            yield ConversationPair(
                id=obj["id"],
                source=obj["source"],
                prompt_tokens=list(obj["prompt_tokens"]),
                response_tokens=list(obj["response_tokens"]),
                prompt_text=obj["prompt"],
                response_text=obj["response"],
            )
