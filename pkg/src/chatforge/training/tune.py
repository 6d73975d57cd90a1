"""Seeded random hyperparameter search with per-trial derived seeds."""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from ..pipeline import ConversationPair
from .config import LrSchedule, TrainingConfig
from .data import build_vocab
from .loop import train
from .model import TinyLM


@dataclass
class SearchSpace:
    lr_range: tuple[float, float] = (1e-5, 5e-5)  # sampled log-uniformly
    batch_sizes: tuple[int, ...] = (16, 32, 64)
    dropouts: tuple[float, ...] = (0.1, 0.2, 0.3)
    weight_decays: tuple[float, ...] = (0.01, 0.1)

    def __post_init__(self):
        lo, hi = self.lr_range
        if not 0 < lo <= hi:
            raise ValueError("lr_range must satisfy 0 < lo <= hi")
        if not (self.batch_sizes and self.dropouts and self.weight_decays):
            raise ValueError("every discrete dimension needs at least one value")


@dataclass
class TrialResult:
    index: int
    params: dict
    objective: float

    def to_dict(self) -> dict:
        return {"trial": self.index, "params": self.params, "objective": self.objective}


def _sample_params(space: SearchSpace, rng: np.random.Generator) -> dict:
    lo, hi = space.lr_range
    lr = lo if lo == hi else float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
    return {
        "lr": lr,
        "micro_batch": int(rng.choice(space.batch_sizes)),
        "dropout": float(rng.choice(space.dropouts)),
        "weight_decay": float(rng.choice(space.weight_decays)),
    }


def tune(
    space: SearchSpace,
    n_trials: int,
    seed: int,
    pairs: Sequence[ConversationPair],
    base_cfg: Optional[TrainingConfig] = None,
    hidden: int = 32,
    trial_epochs: int = 1,
) -> tuple[dict, list[TrialResult]]:
    """Random search; objective is final validation perplexity of a short run.

    Each trial derives its own seed from (seed, trial index), so trials are
    independent, order-insensitive, and the whole search is reproducible.
    Returns the argmin parameters and the full trial log.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    base_cfg = base_cfg or TrainingConfig()
    vocab = build_vocab(pairs)

    results: list[TrialResult] = []
    for index in range(n_trials):
        seq = np.random.SeedSequence(entropy=seed, spawn_key=(2, index))
        rng = np.random.default_rng(seq)
        params = _sample_params(space, rng)
        # The run seed hashes the sampled point, not the trial index, so two
        # trials landing on the same configuration report the same objective.
        fingerprint = zlib.crc32(json.dumps(params, sort_keys=True).encode("utf-8"))
        trial_seed = int(
            np.random.SeedSequence(entropy=seed, spawn_key=(3, fingerprint)).generate_state(1)[0]
        )
        cfg = replace(
            base_cfg,
            micro_batch=params["micro_batch"],
            dropout=params["dropout"],
            weight_decay=params["weight_decay"],
            epochs=trial_epochs,
            seed=trial_seed,
        )
        model = TinyLM(vocab_size=len(vocab), hidden=hidden, seed=trial_seed)
        schedule = LrSchedule(
            kind="warmup_linear_decay", base_lr=params["lr"], warmup_steps=0
        )
        history = train(model, pairs, cfg, schedule=schedule, vocab=vocab)
        results.append(
            TrialResult(index=index, params=params, objective=history.final_val_perplexity)
        )

    best = min(results, key=lambda r: (r.objective, r.index))
    return dict(best.params), results
