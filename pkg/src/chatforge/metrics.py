"""Generation-quality metrics: BLEU, ROUGE-N, distinct-n, coherence, perplexity.

All scoring functions are pure and operate on whitespace tokens. Corpus
aggregation uses fixed-order compensated summation so reports are bit-stable
regardless of how callers fan out the per-pair work.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

Tokens = Sequence[str]

_SENTENCE_SPLIT_RE = re.compile(r"[.!?]+(?:\s+|$)")


@dataclass
class NGramCounts:
    """Multiset of the contiguous n-token windows of a sequence."""

    n: int
    counts: Counter
    total: int

    def __post_init__(self):
        if self.total != sum(self.counts.values()):
            raise ValueError("total must equal the sum of counts")


@dataclass
class BleuConfig:
    max_order: int = 4
    weights: Optional[list[float]] = None  # None -> uniform 1/max_order
    smoothing: str = "none"  # "none" | "add_epsilon"
    epsilon: float = 1e-9

    def __post_init__(self):
        if self.max_order < 1:
            raise ValueError("max_order must be >= 1")
        if self.weights is None:
            self.weights = [1.0 / self.max_order] * self.max_order
        if len(self.weights) != self.max_order:
            raise ValueError("need one weight per n-gram order")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be non-negative")
        if abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        if self.smoothing not in ("none", "add_epsilon"):
            raise ValueError(f"unknown smoothing mode {self.smoothing!r}")


@dataclass
class MetricReport:
    """Per-corpus metric bundle. None marks a metric that was undefined."""

    bleu: Optional[float]
    rouge_1: Optional[float]
    rouge_2: Optional[float]
    coherence: Optional[float]
    distinct_1: Optional[float]
    distinct_2: Optional[float]
    perplexity: Optional[float]
    n_pairs: int
    skipped: int = 0

    def to_dict(self) -> dict:
        return {
            "bleu": self.bleu,
            "rouge_1": self.rouge_1,
            "rouge_2": self.rouge_2,
            "coherence": self.coherence,
            "distinct_1": self.distinct_1,
            "distinct_2": self.distinct_2,
            "perplexity": self.perplexity,
            "n_pairs": self.n_pairs,
            "skipped": self.skipped,
        }


def ngram_counts(tokens: Tokens, n: int) -> NGramCounts:
    """Count every contiguous window of n tokens."""
    if n < 1:
        raise ValueError("n must be >= 1")
    counts = Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))
    return NGramCounts(n=n, counts=counts, total=max(len(tokens) - n + 1, 0))


def _closest_reference_length(cand_len: int, references: Sequence[Tokens]) -> int:
    # Closest reference length to the candidate; ties broken toward shorter.
    return min((abs(len(r) - cand_len), len(r)) for r in references)[1]


def bleu(candidate: Tokens, references: Sequence[Tokens], cfg: Optional[BleuConfig] = None) -> float:
    """Clipped n-gram precision score with a brevity penalty, in [0, 1].

    Per-order precision p_n clips each candidate n-gram count at the maximum
    count seen in any single reference. The brevity penalty is 1 when the
    candidate is longer than the closest reference, else exp(1 - r/c).
    With smoothing "none", any zero p_n zeroes the whole score; with
    "add_epsilon", p_n = (matched + eps) / (total + eps), and eps alone when
    the candidate has no n-grams of that order.
    """
    cfg = cfg or BleuConfig()
    if not candidate:
        raise ValueError("candidate must be non-empty")
    if not references or any(not r for r in references):
        raise ValueError("references must be non-empty")

    score = 1.0
    for n, weight in zip(range(1, cfg.max_order + 1), cfg.weights):
        cand = ngram_counts(candidate, n)
        max_ref: Counter = Counter()
        for ref in references:
            for gram, count in ngram_counts(ref, n).counts.items():
                if count > max_ref[gram]:
                    max_ref[gram] = count
        matched = sum(min(count, max_ref[gram]) for gram, count in cand.counts.items())
        if cfg.smoothing == "add_epsilon":
            if cand.total == 0:
                p_n = cfg.epsilon
            else:
                p_n = (matched + cfg.epsilon) / (cand.total + cfg.epsilon)
        else:
            if cand.total == 0 or matched == 0:
                return 0.0
            p_n = matched / cand.total
        # Product form keeps exact fixtures exact (0.25 ** 1.0 == 0.25).
        score *= p_n**weight

    c = len(candidate)
    r = _closest_reference_length(c, references)
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * score


def rouge_n(candidate: Tokens, references: Sequence[Tokens], n: int) -> float:
    """Recall-oriented n-gram overlap: clipped matches over reference totals."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cand = ngram_counts(candidate, n)
    numerator = 0
    denominator = 0
    for ref in references:
        ref_counts = ngram_counts(ref, n)
        denominator += ref_counts.total
        for gram, count in ref_counts.counts.items():
            numerator += min(cand.counts[gram], count)
    if denominator == 0:
        raise ValueError(f"no reference has {n} or more tokens")
    return numerator / denominator


def distinct_n(responses: Sequence[Tokens], n: int, per_response_mean: bool = False) -> float:
    """Unique / total n-grams pooled across all responses.

    ``per_response_mean`` switches to the mean of per-response ratios
    (responses with fewer than n tokens are ignored in that mode).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if per_response_mean:
        ratios = []
        for resp in responses:
            c = ngram_counts(resp, n)
            if c.total > 0:
                ratios.append(len(c.counts) / c.total)
        if not ratios:
            raise ValueError("no response has enough tokens")
        return math.fsum(ratios) / len(ratios)

    pooled: Counter = Counter()
    total = 0
    for resp in responses:
        c = ngram_counts(resp, n)
        pooled.update(c.counts)
        total += c.total
    if total == 0:
        raise ValueError("no response has enough tokens")
    return len(pooled) / total


def embed_tf(sentence: Tokens, vocab: dict[str, int]) -> np.ndarray:
    """L2-normalized term-frequency vector over a fixed vocabulary index.

    Out-of-vocabulary tokens are ignored; an empty or fully out-of-vocab
    sentence embeds to the zero vector.
    """
    vec = np.zeros(len(vocab), dtype=np.float64)
    for token in sentence:
        idx = vocab.get(token)
        if idx is not None:
            vec[idx] += 1.0
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


def split_sentences(text: str) -> list[str]:
    """Split on sentence punctuation followed by whitespace/end; drop empties."""
    parts = _SENTENCE_SPLIT_RE.split(text)
    return [p.strip() for p in parts if p.strip()]


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    # Vectors arrive unit-length or zero; cosine with a zero vector is 0.
    # Clamped so rounding can't push identical vectors past 1.
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return min(max(float(np.dot(a, b) / (na * nb)), -1.0), 1.0)


def coherence(
    text: str,
    splitter: Callable[[str], list[str]] = split_sentences,
    embedder: Optional[Callable[[Tokens], np.ndarray]] = None,
) -> Optional[float]:
    """Mean cosine similarity between embeddings of consecutive sentences.

    Returns None (undefined) when the text has fewer than two sentences.
    The default embedder is a term-frequency vector over the vocabulary of
    the text itself, which leaves cosines unchanged versus any larger vocab.
    """
    sentences = [s.split() for s in splitter(text)]
    if len(sentences) < 2:
        return None
    if embedder is None:
        vocab = {tok: i for i, tok in enumerate(sorted({t for s in sentences for t in s}))}
        embedder = lambda s: embed_tf(s, vocab)  # noqa: E731
    vectors = [embedder(s) for s in sentences]
    sims = [_cosine(vectors[i], vectors[i + 1]) for i in range(len(vectors) - 1)]
    return math.fsum(sims) / len(sims)


def perplexity(token_nlls: Sequence[float]) -> float:
    """exp of the mean per-token negative log-likelihood (natural log)."""
    if len(token_nlls) == 0:
        raise ValueError("need at least one token NLL")
    nlls = np.asarray(token_nlls, dtype=np.float64)
    if not np.all(np.isfinite(nlls)) or np.any(nlls < 0):
        raise ValueError("NLLs must be finite and non-negative")
    return float(np.exp(math.fsum(token_nlls) / len(token_nlls)))


@dataclass
class EvalPair:
    """One candidate with its references; accepts raw text or token lists."""

    candidate: str | Tokens
    references: Sequence[str | Tokens]

    def candidate_tokens(self) -> list[str]:
        return self.candidate.split() if isinstance(self.candidate, str) else list(self.candidate)

    def candidate_text(self) -> str:
        return self.candidate if isinstance(self.candidate, str) else " ".join(self.candidate)

    def reference_tokens(self) -> list[list[str]]:
        return [r.split() if isinstance(r, str) else list(r) for r in self.references]


def evaluate_corpus(
    pairs: Sequence[EvalPair | tuple],
    responses_for_distinct: Optional[Sequence[Tokens]] = None,
    cfg: Optional[BleuConfig] = None,
    token_nlls: Optional[Sequence[float]] = None,
) -> MetricReport:
    """Score a corpus of candidate/reference pairs into one MetricReport.

    BLEU and ROUGE are arithmetic means over the scored pairs; distinct-n
    pools n-grams corpus-level (over ``responses_for_distinct``, defaulting
    to the candidates); coherence averages over scored candidates with at
    least two sentences. A pair whose per-metric preconditions fail (empty
    candidate, references too short) is skipped whole and counted once
    under ``skipped``; the corpus run never aborts.
    """
    if not pairs:
        raise ValueError("pairs must be non-empty")
    cfg = cfg or BleuConfig()
    pairs = [p if isinstance(p, EvalPair) else EvalPair(*p) for p in pairs]

    bleus: list[float] = []
    rouge1s: list[float] = []
    rouge2s: list[float] = []
    coherences: list[float] = []
    skipped_pairs = 0

    for pair in pairs:
        cand = pair.candidate_tokens()
        refs = pair.reference_tokens()
        try:
            pair_bleu = bleu(cand, refs, cfg)
            pair_rouge1 = rouge_n(cand, refs, 1)
            pair_rouge2 = rouge_n(cand, refs, 2)
        except ValueError:
            skipped_pairs += 1
            continue
        bleus.append(pair_bleu)
        rouge1s.append(pair_rouge1)
        rouge2s.append(pair_rouge2)
        coh = coherence(pair.candidate_text())
        if coh is not None:
            coherences.append(coh)

    if responses_for_distinct is None:
        responses_for_distinct = [p.candidate_tokens() for p in pairs]
    distincts: dict[int, Optional[float]] = {}
    for n in (1, 2):
        try:
            distincts[n] = distinct_n(responses_for_distinct, n)
        except ValueError:
            distincts[n] = None

    def mean(values: list[float]) -> Optional[float]:
        return math.fsum(values) / len(values) if values else None

    return MetricReport(
        bleu=mean(bleus),
        rouge_1=mean(rouge1s),
        rouge_2=mean(rouge2s),
        coherence=mean(coherences),
        distinct_1=distincts[1],
        distinct_2=distincts[2],
        perplexity=perplexity(token_nlls) if token_nlls else None,
        n_pairs=len(pairs),
        skipped=skipped_pairs,
    )
