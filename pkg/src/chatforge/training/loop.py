"""Instrumented training loop for the tiny LM.

One optimizer step is: forward with seeded dropout -> label-smoothed loss ->
scaled backward -> unscale + overflow check -> clip -> accumulate -> Adam at
the scheduled rate. Validation perplexity is measured every
``eval_every_steps`` and at every epoch boundary (including epoch 0, before
any update), which is also where checkpoints are written and the unfreeze
plan advances. Fully deterministic for a fixed seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..metrics import perplexity
from ..pipeline import ConversationPair
from .config import LrSchedule, TrainingConfig, UnfreezePlan, lr_at
from .data import bigram_examples, build_vocab, encode, split_pairs
from .model import LoraAdapter, TinyLM, save_checkpoint
from .optim import AdamState, EarlyStopping, LossScaler, accumulate, adam_step, clip_gradients, loss_scaler_update

DIVERGENCE_LIMIT = 10


@dataclass
class EvalPoint:
    step: int
    lr: float
    loss: Optional[float]
    val_perplexity: float
    frozen_groups: list[str]
    scenario_nlls: Optional[list[float]] = None

    def to_dict(self) -> dict:
        row = {
            "step": self.step,
            "lr": self.lr,
            "loss": self.loss,
            "val_perplexity": self.val_perplexity,
            "frozen_groups": self.frozen_groups,
        }
        if self.scenario_nlls is not None:
            row["scenario_nlls"] = self.scenario_nlls
        return row


@dataclass
class TrainingHistory:
    eval_points: list[EvalPoint] = field(default_factory=list)
    checkpoints: list[dict] = field(default_factory=list)  # {"epoch", "step", "path"}
    best_step: int = -1
    best_metric: float = math.inf
    stopped_early: bool = False
    steps_per_epoch: int = 0
    planned_steps: int = 0
    completed_steps: int = 0

    @property
    def final_val_perplexity(self) -> float:
        return self.eval_points[-1].val_perplexity

    def write(self, path: str | Path) -> None:
        """One eval point per JSONL line."""
        with Path(path).open("w", encoding="utf-8") as handle:
            for point in self.eval_points:
                handle.write(json.dumps(point.to_dict()) + "\n")


def read_history(path: str | Path) -> list[dict]:
    with Path(path).open("r", encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def scenario_monitor(
    model: TinyLM,
    scenarios: Sequence,
    vocab: dict[str, int],
) -> list[float]:
    """Mean response NLL per scenario; read-only, draws no randomness.

    Each scenario is (prompt_tokens, response_tokens) or any object with
    those attributes. The response is scored token by token conditioned on
    the preceding token, starting from the end of the prompt.
    """
    if not scenarios:
        raise ValueError("scenarios must be non-empty")
    report = []
    for scenario in scenarios:
        if hasattr(scenario, "prompt_tokens"):
            prompt, response = scenario.prompt_tokens, scenario.response_tokens
        else:
            prompt, response = scenario
        stream = encode(list(prompt) + list(response), vocab)
        start = max(len(prompt) - 1, 0)
        x = stream[start:-1]
        y = stream[start + 1 :]
        if x.shape[0] == 0:
            raise ValueError("scenario has no scorable response tokens")
        nlls = model.token_nlls(x, y)
        report.append(float(np.mean(nlls)))
    return report


def generate_responses(
    model: TinyLM,
    pairs: Sequence[ConversationPair],
    vocab: dict[str, int],
    rng: np.random.Generator,
) -> list[list[str]]:
    """Sample one reference-length continuation per pair's prompt."""
    inverse = {idx: tok for tok, idx in vocab.items()}
    out = []
    for pair in pairs:
        context = encode(pair.prompt_tokens[-1:], vocab)[0]
        sampled = model.sample(int(context), len(pair.response_tokens), rng)
        out.append([inverse[i] for i in sampled])
    return out


def _dropout_mask(rng: np.random.Generator, shape: tuple[int, int], rate: float) -> np.ndarray:
    # Inverted scaling: kept units are divided by the keep probability so
    # evaluation needs no rescaling.
    return (rng.random(shape) >= rate) / (1.0 - rate)


def train(
    model: TinyLM,
    pairs: Sequence[ConversationPair],
    cfg: TrainingConfig,
    schedule: Optional[LrSchedule] = None,
    plan: Optional[UnfreezePlan] = None,
    adapter: Optional[LoraAdapter] = None,
    scenarios: Optional[Sequence] = None,
    vocab: Optional[dict[str, int]] = None,
    checkpoint_dir: Optional[str | Path] = None,
) -> TrainingHistory:
    """Run the full control loop and return the instrumented history."""
    if not pairs:
        raise ValueError("corpus is empty")
    vocab = vocab or build_vocab(pairs)
    if model.vocab_size != len(vocab):
        raise ValueError(
            f"model vocabulary ({model.vocab_size}) does not match corpus ({len(vocab)})"
        )
    if adapter is not None:
        model.attach_adapter(adapter)

    plan = plan or UnfreezePlan.all_epochs(cfg.epochs, frozenset(("W1", "W2")))
    if plan.total_epochs != cfg.epochs:
        raise ValueError(f"plan covers {plan.total_epochs} epochs, config says {cfg.epochs}")

    train_pairs, val_pairs = split_pairs(pairs, cfg.val_fraction, cfg.seed)
    train_x, train_y = bigram_examples(train_pairs, vocab)
    val_x, val_y = bigram_examples(val_pairs or train_pairs, vocab)
    effective = cfg.effective_batch
    steps_per_epoch = train_x.shape[0] // effective
    if steps_per_epoch == 0:
        raise ValueError(
            f"corpus yields {train_x.shape[0]} examples, fewer than one effective "
            f"batch of {effective}"
        )
    planned = steps_per_epoch * cfg.epochs
    schedule = (schedule or LrSchedule(warmup_steps=min(500, planned // 10))).resolved(planned)

    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(0,)))
    adam = AdamState.init(model.parameters())
    scaler = LossScaler()
    stopper = EarlyStopping(patience=cfg.patience)
    history = TrainingHistory(steps_per_epoch=steps_per_epoch, planned_steps=planned)
    checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
    if checkpoint_dir:
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    def frozen_names() -> list[str]:
        return sorted(g for g, is_frozen in model.frozen.items() if is_frozen)

    def record_eval(step: int, losses: list[float]) -> bool:
        nlls = model.token_nlls(val_x, val_y)
        val_ppl = perplexity(nlls.tolist())
        point = EvalPoint(
            step=step,
            lr=lr_at(schedule, min(step, schedule.total_steps)),
            loss=(math.fsum(losses) / len(losses)) if losses else None,
            val_perplexity=val_ppl,
            frozen_groups=frozen_names(),
        )
        if scenarios:
            point.scenario_nlls = scenario_monitor(model, scenarios, vocab)
        history.eval_points.append(point)
        losses.clear()
        return stopper.update(val_ppl, step)

    def save_epoch_checkpoint(epoch: int, step: int) -> None:
        if checkpoint_dir is None:
            return
        path = checkpoint_dir / f"epoch{epoch:03d}.ckpt"
        save_checkpoint(model, path)
        history.checkpoints.append({"epoch": epoch, "step": step, "path": str(path)})

    global_step = 0
    diverged_streak = 0
    losses_since_eval: list[float] = []
    model.set_frozen(frozenset(("W1", "W2")) - plan.trainable_at(0))
    record_eval(0, losses_since_eval)
    save_epoch_checkpoint(0, 0)

    for epoch in range(cfg.epochs):
        model.set_frozen(frozenset(("W1", "W2")) - plan.trainable_at(epoch))
        order = rng.permutation(train_x.shape[0])
        for step_in_epoch in range(steps_per_epoch):
            micro_grads = []
            micro_losses = []
            base = step_in_epoch * effective
            for micro in range(cfg.accum_steps):
                sl = order[base + micro * cfg.micro_batch : base + (micro + 1) * cfg.micro_batch]
                keep = (
                    _dropout_mask(rng, (cfg.micro_batch, model.hidden), cfg.dropout)
                    if cfg.dropout > 0
                    else np.ones((cfg.micro_batch, model.hidden))
                )
                loss, _nll, grads = model.loss_and_grads(
                    train_x[sl], train_y[sl], cfg.label_smoothing, keep
                )
                micro_grads.append({k: g * scaler.scale for k, g in grads.items()})
                micro_losses.append(loss)
            averaged = accumulate(micro_grads, cfg.accum_steps)
            unscaled = {k: g / scaler.scale for k, g in averaged.items()}
            clipped, global_norm = clip_gradients(unscaled, cfg.clip_max_norm)
            global_step += 1

            if not math.isfinite(global_norm):
                scaler = loss_scaler_update(scaler, True)  # skip the optimizer step
            else:
                lr = lr_at(schedule, min(global_step, schedule.total_steps))
                adam_step(
                    adam,
                    model.parameters(),
                    clipped,
                    lr,
                    weight_decay=cfg.weight_decay,
                    frozen={g for g, is_frozen in model.frozen.items() if is_frozen},
                )
                scaler = loss_scaler_update(scaler, False)
                step_loss = math.fsum(micro_losses) / len(micro_losses)
                losses_since_eval.append(step_loss)
                if not math.isfinite(step_loss):
                    diverged_streak += 1
                    if diverged_streak >= DIVERGENCE_LIMIT:
                        raise RuntimeError(
                            f"training diverged: loss non-finite for {diverged_streak} "
                            f"consecutive steps at step {global_step}"
                        )
                else:
                    diverged_streak = 0

            at_epoch_end = step_in_epoch == steps_per_epoch - 1
            due = cfg.eval_every_steps and global_step % cfg.eval_every_steps == 0
            if due or at_epoch_end:
                if record_eval(global_step, losses_since_eval):
                    break
        save_epoch_checkpoint(epoch + 1, global_step)
        if stopper.stopped:
            break

    history.best_step = stopper.best_step
    history.best_metric = stopper.best_metric
    history.stopped_early = stopper.stopped
    history.completed_steps = global_step
    return history


def write_manifest(
    path: str | Path,
    corpus_path: str,
    cfg: TrainingConfig,
    schedule: LrSchedule,
    model: TinyLM,
    vocab: dict[str, int],
    history: TrainingHistory,
) -> None:
    """Sidecar JSON so downstream commands can rebuild the validation split."""
    manifest = {
        "corpus": str(corpus_path),
        "seed": cfg.seed,
        "val_fraction": cfg.val_fraction,
        "steps_per_epoch": history.steps_per_epoch,
        "vocab": sorted(vocab, key=vocab.get),
        "model": {
            "vocab_size": model.vocab_size,
            "hidden": model.hidden,
            "lora": (
                {"rank": model.adapter.rank, "alpha": model.adapter.alpha}
                if model.adapter
                else None
            ),
        },
        "schedule": {
            "kind": schedule.kind,
            "base_lr": schedule.base_lr,
            "total_steps": schedule.total_steps,
        },
        "checkpoints": history.checkpoints,
        "best_step": history.best_step,
        "best_metric": history.best_metric,
        "stopped_early": history.stopped_early,
    }
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def manifest_path_for(history_path: str | Path) -> Path:
    return Path(str(history_path) + ".meta.json")
