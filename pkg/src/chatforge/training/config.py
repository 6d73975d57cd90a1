"""Training-control configuration: LR schedules, run hyperparameters, unfreezing."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class LrSchedule:
    """Piecewise-linear learning-rate schedule.

    ``warmup_linear_decay`` ramps 0 -> base_lr over the warmup steps, then
    decays linearly to 0 at total_steps. ``dynamic_two_phase`` ramps
    base_lr -> peak_lr over ramp_steps, then decays linearly to final_lr.
    """

    kind: str = "warmup_linear_decay"
    base_lr: float = 2e-5
    warmup_steps: int = 500
    total_steps: int = 0  # 0 means "resolve from the planned run length"
    peak_lr: float = 5e-5
    ramp_steps: int = 1000
    final_lr: float = 1e-6

    def __post_init__(self):
        if self.kind not in ("warmup_linear_decay", "dynamic_two_phase"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")
        if self.kind == "warmup_linear_decay":
            # base_lr 0 is allowed here: it degenerates to the all-zero
            # schedule used to verify that training without a learning rate
            # leaves parameters bit-identical.
            if self.base_lr < 0:
                raise ValueError("base_lr must be >= 0")
            if self.warmup_steps < 0:
                raise ValueError("warmup_steps must be >= 0")
            if self.total_steps and self.warmup_steps > self.total_steps:
                raise ValueError("need warmup_steps <= total_steps")
        else:
            if self.base_lr <= 0 or self.peak_lr <= 0 or self.final_lr <= 0:
                raise ValueError("base_lr, peak_lr and final_lr must be > 0")
            if self.ramp_steps <= 0:
                raise ValueError("ramp_steps must be > 0")
            if self.total_steps and self.ramp_steps >= self.total_steps:
                raise ValueError("need ramp_steps < total_steps")

    def resolved(self, planned_steps: int) -> "LrSchedule":
        """Fill in total_steps when left at the 0 sentinel."""
        from dataclasses import replace

        if self.total_steps:
            if self.total_steps < planned_steps:
                raise ValueError(
                    f"schedule covers {self.total_steps} steps but the run plans "
                    f"{planned_steps}"
                )
            return self
        return replace(self, total_steps=planned_steps)


def _lerp(lo: float, hi: float, t: float) -> float:
    # Convex-combination form is exact at both endpoints.
    return lo * (1.0 - t) + hi * t


def lr_at(schedule: LrSchedule, step: int) -> float:
    """Learning rate at an integer step in [0, total_steps]."""
    if not 0 <= step <= schedule.total_steps:
        raise ValueError(f"step {step} outside [0, {schedule.total_steps}]")
    if schedule.kind == "warmup_linear_decay":
        if step <= schedule.warmup_steps:
            if schedule.warmup_steps == 0:
                return schedule.base_lr
            return _lerp(0.0, schedule.base_lr, step / schedule.warmup_steps)
        span = schedule.total_steps - schedule.warmup_steps
        return _lerp(schedule.base_lr, 0.0, (step - schedule.warmup_steps) / span)
    if step <= schedule.ramp_steps:
        return _lerp(schedule.base_lr, schedule.peak_lr, step / schedule.ramp_steps)
    span = schedule.total_steps - schedule.ramp_steps
    return _lerp(schedule.peak_lr, schedule.final_lr, (step - schedule.ramp_steps) / span)


@dataclass
class TrainingConfig:
    micro_batch: int = 32
    accum_steps: int = 4
    epochs: int = 3
    weight_decay: float = 0.01
    dropout: float = 0.1
    label_smoothing: float = 0.1
    clip_max_norm: float = 1.0
    eval_every_steps: int = 5000
    patience: int = 3
    seed: int = 0
    val_fraction: float = 0.10

    def __post_init__(self):
        if self.micro_batch < 1 or self.accum_steps < 1 or self.epochs < 1:
            raise ValueError("micro_batch, accum_steps and epochs must be >= 1")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError("label_smoothing must be in [0, 1)")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")
        if self.clip_max_norm <= 0:
            raise ValueError("clip_max_norm must be > 0")

    @property
    def effective_batch(self) -> int:
        return self.micro_batch * self.accum_steps


@dataclass
class UnfreezePlan:
    """Ordered stages of (epoch count, trainable parameter groups).

    The trainable set must be non-decreasing across stages and stage epochs
    must add up to the run's epoch count.
    """

    stages: list[tuple[int, frozenset[str]]] = field(default_factory=list)

    def __post_init__(self):
        self.stages = [(int(n), frozenset(groups)) for n, groups in self.stages]
        if any(n < 1 for n, _ in self.stages):
            raise ValueError("every stage must cover at least one epoch")
        for (_, before), (_, after) in zip(self.stages, self.stages[1:]):
            if not before <= after:
                raise ValueError("trainable groups must be non-decreasing across stages")

    @property
    def total_epochs(self) -> int:
        return sum(n for n, _ in self.stages)

    def trainable_at(self, epoch: int) -> frozenset[str]:
        """Trainable groups for a 0-based epoch index."""
        if epoch < 0 or epoch >= self.total_epochs:
            raise ValueError(f"epoch {epoch} outside the plan")
        seen = 0
        for n, groups in self.stages:
            seen += n
            if epoch < seen:
                return groups
        raise AssertionError("unreachable")

    @classmethod
    def all_epochs(cls, epochs: int, groups: frozenset[str] | set[str]) -> "UnfreezePlan":
        return cls(stages=[(epochs, frozenset(groups))])
