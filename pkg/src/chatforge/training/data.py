"""Corpus handling for the trainer: vocab, splits, bigram examples, synthesis."""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

import numpy as np

from ..pipeline import ConversationPair

PairLike = ConversationPair


def build_vocab(pairs: Sequence[PairLike]) -> dict[str, int]:
    """Sorted token -> index map over both sides of every pair."""
    tokens = set()
    for pair in pairs:
        tokens.update(pair.prompt_tokens)
        tokens.update(pair.response_tokens)
    return {tok: i for i, tok in enumerate(sorted(tokens))}


def encode(tokens: Iterable[str], vocab: dict[str, int]) -> np.ndarray:
    try:
        return np.array([vocab[t] for t in tokens], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"token {exc.args[0]!r} missing from vocabulary") from exc


def split_pairs(
    pairs: Sequence[PairLike], val_fraction: float, seed: int
) -> tuple[list[PairLike], list[PairLike]]:
    """Seeded shuffle split; reproducible from (pairs, val_fraction, seed) alone."""
    if not 0.0 <= val_fraction < 1.0:
        raise ValueError("val_fraction must be in [0, 1)")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    order = rng.permutation(len(pairs))
    n_val = int(round(val_fraction * len(pairs)))
    if val_fraction > 0 and n_val == 0 and len(pairs) > 1:
        n_val = 1
    val_idx = set(order[:n_val].tolist())
    train = [pairs[i] for i in range(len(pairs)) if i not in val_idx]
    val = [pairs[i] for i in sorted(val_idx)]
    return train, val


def bigram_examples(
    pairs: Sequence[PairLike], vocab: dict[str, int]
) -> tuple[np.ndarray, np.ndarray]:
    """(input, target) index arrays over consecutive tokens within each pair.

    Prompt and response are treated as one stream per pair; streams never
    cross pair boundaries.
    """
    xs: list[np.ndarray] = []
    ys: list[np.ndarray] = []
    for pair in pairs:
        stream = encode(list(pair.prompt_tokens) + list(pair.response_tokens), vocab)
        if stream.shape[0] >= 2:
            xs.append(stream[:-1])
            ys.append(stream[1:])
    if not xs:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(xs), np.concatenate(ys)


# ---------------------------------------------------------------------------
# Synthetic first-order Markov corpora for desk-scale runs and benchmarks.
# ---------------------------------------------------------------------------


def cycle_transition_matrix(n_states: int, stickiness: float = 0.8) -> np.ndarray:
    """Transition matrix: mass ``stickiness`` on the next state in a cycle,
    the rest spread uniformly over all states."""
    if not 0.0 < stickiness < 1.0:
        raise ValueError("stickiness must be in (0, 1)")
    trans = np.full((n_states, n_states), (1.0 - stickiness) / n_states)
    for i in range(n_states):
        trans[i, (i + 1) % n_states] += stickiness
    return trans


def sample_markov_tokens(
    trans: np.ndarray, n_tokens: int, rng: np.random.Generator, start: Optional[int] = None
) -> np.ndarray:
    n_states = trans.shape[0]
    state = int(rng.integers(n_states)) if start is None else start
    out = np.empty(n_tokens, dtype=np.int64)
    for i in range(n_tokens):
        state = int(rng.choice(n_states, p=trans[state]))
        out[i] = state
    return out


def _chain_to_pairs(
    chain: np.ndarray, symbols: list[str], prompt_len: int, response_len: int, id_prefix: str
) -> list[ConversationPair]:
    window = prompt_len + response_len
    pairs = []
    for start in range(0, chain.shape[0] - window + 1, window):
        chunk = chain[start : start + window]
        prompt = [symbols[t] for t in chunk[:prompt_len]]
        response = [symbols[t] for t in chunk[prompt_len:]]
        pairs.append(
            ConversationPair(
                id=f"{id_prefix}-{start // window:05d}",
                source="hf",
                prompt_tokens=prompt,
                response_tokens=response,
                prompt_text=" ".join(prompt),
                response_text=" ".join(response),
            )
        )
    return pairs


def make_markov_pairs(
    n_states: int = 16,
    n_tokens: int = 10_000,
    prompt_len: int = 8,
    response_len: int = 16,
    seed: int = 0,
    stickiness: float = 0.8,
    symbols: Optional[list[str]] = None,
) -> list[ConversationPair]:
    """Chop one long Markov chain into prompt/response training pairs."""
    rng = np.random.default_rng(seed)
    trans = cycle_transition_matrix(n_states, stickiness)
    chain = sample_markov_tokens(trans, n_tokens, rng)
    if symbols is None:
        symbols = [f"w{i:02d}" for i in range(n_states)]
    if len(symbols) != n_states:
        raise ValueError("need one symbol per state")
    return _chain_to_pairs(chain, symbols, prompt_len, response_len, "markov")


def make_topic_loop_pairs(
    n_loops: int = 3,
    loop_len: int = 12,
    n_tokens: int = 12_000,
    prompt_len: int = 8,
    response_len: int = 24,
    seed: int = 0,
    stickiness: float = 0.9,
) -> list[ConversationPair]:
    """Sentence-shaped toy language: topic word loops, each with its own
    sentence terminator.

    The chain mostly walks one loop (repeating that topic's words, closing a
    sentence once per lap) and occasionally jumps anywhere. Terminators are
    per-loop (".", "!", "?") so the token stream keeps topic identity across
    sentence boundaries; a model that learns the transitions produces
    topical, multi-sentence responses, while an untrained one emits uniform
    noise. Useful for trend-shape checks.
    """
    if loop_len < 3 or n_loops < 1:
        raise ValueError("need loop_len >= 3 and n_loops >= 1")
    terminators = [".", "!", "?"]
    n_states = n_loops * loop_len
    trans = np.full((n_states, n_states), (1.0 - stickiness) / n_states)
    for state in range(n_states):
        loop = state // loop_len
        successor = loop * loop_len + (state % loop_len + 1) % loop_len
        trans[state, successor] += stickiness
    symbols = []
    for loop in range(n_loops):
        symbols.extend(f"l{loop}w{j}" for j in range(loop_len - 1))
        symbols.append(terminators[loop % len(terminators)])
    rng = np.random.default_rng(seed)
    chain = sample_markov_tokens(trans, n_tokens, rng)
    return _chain_to_pairs(chain, symbols, prompt_len, response_len, "loop")
