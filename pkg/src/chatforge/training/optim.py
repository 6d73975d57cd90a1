"""Optimizer-side mechanics: Adam, clipping, accumulation, smoothing, scaling."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import kernels


def clip_gradients(
    grads: dict[str, np.ndarray], max_norm: float
) -> tuple[dict[str, np.ndarray], float]:
    """Scale all gradients jointly so the global L2 norm is at most max_norm.

    The norm is taken over every group together. A non-finite gradient
    yields a non-finite global norm and the gradients are returned
    untouched; callers treat that as the overflow signal.
    """
    if max_norm <= 0:
        raise ValueError("max_norm must be > 0")
    sq = 0.0
    for g in grads.values():
        sq += float(np.sum(g * g))
    global_norm = math.sqrt(sq) if math.isfinite(sq) else float("inf")
    if not math.isfinite(global_norm):
        return grads, global_norm
    if global_norm > max_norm:
        scale = max_norm / global_norm
        return {name: g * scale for name, g in grads.items()}, global_norm
    return {name: g.copy() for name, g in grads.items()}, global_norm


def label_smoothed_ce(
    probs: np.ndarray, target: int, eps: float
) -> tuple[float, np.ndarray]:
    """Cross-entropy against the eps-smoothed target distribution.

    Returns (loss, gradient w.r.t. pre-softmax logits = probs - q). A zero
    probability where the smoothed target has mass yields an infinite loss
    rather than an exception.
    """
    probs = np.asarray(probs, dtype=np.float64)
    k = probs.shape[0]
    if not 0 <= target < k:
        raise ValueError(f"target {target} outside [0, {k})")
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must be in [0, 1)")
    if abs(float(probs.sum()) - 1.0) > 1e-9 or np.any(probs < 0):
        raise ValueError("probs must be a probability vector")
    q = np.full(k, eps / k)
    q[target] += 1.0 - eps
    grad = probs - q
    if np.any((probs == 0.0) & (q > 0.0)):
        return float("inf"), grad
    active = q > 0.0
    loss = -float(np.sum(q[active] * np.log(probs[active])))
    return loss, grad


@dataclass
class AdamState:
    """First/second moment accumulators per parameter group."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params: dict[str, np.ndarray], **kwargs) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            **kwargs,
        )


def adam_step(
    state: AdamState,
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    lr: float,
    weight_decay: float = 0.0,
    frozen: Optional[set[str] | frozenset[str]] = None,
    no_decay: Optional[set[str] | frozenset[str]] = None,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """Bias-corrected Adam with decoupled weight decay, in place.

    Decay multiplies parameters by (1 - lr*wd) before the Adam delta and is
    skipped for groups listed in ``no_decay`` (bias-like parameters).
    Frozen groups are left untouched, moments included.
    """
    frozen = frozen or set()
    no_decay = no_decay or set()
    for name, g in grads.items():
        if name not in params:
            raise ValueError(f"gradient for unknown parameter {name!r}")
        if g.shape != params[name].shape:
            raise ValueError(f"shape mismatch for {name}: {g.shape} vs {params[name].shape}")
    state.t += 1
    for name, p in params.items():
        if name in frozen or name not in grads:
            continue
        wd = 0.0 if name in no_decay else weight_decay
        kernels.adam_update(
            p.reshape(-1),
            np.ascontiguousarray(grads[name], dtype=np.float64).reshape(-1),
            state.m[name].reshape(-1),
            state.v[name].reshape(-1),
            state.t,
            lr,
            state.beta1,
            state.beta2,
            state.eps,
            wd,
        )
    return params, state


def accumulate(
    micro_grads: Sequence[dict[str, np.ndarray]], accum_steps: Optional[int] = None
) -> dict[str, np.ndarray]:
    """Elementwise mean of per-micro-batch gradient sets."""
    if not micro_grads:
        raise ValueError("micro_grads must be non-empty")
    if accum_steps is not None and len(micro_grads) != accum_steps:
        raise ValueError(f"expected {accum_steps} gradient sets, got {len(micro_grads)}")
    names = set(micro_grads[0])
    if any(set(g) != names for g in micro_grads):
        raise ValueError("gradient sets disagree on parameter names")
    out = {}
    for name in names:
        stack = [g[name] for g in micro_grads]
        if any(s.shape != stack[0].shape for s in stack):
            raise ValueError(f"shape mismatch across micro-batches for {name}")
        out[name] = sum(stack[1:], start=stack[0].copy()) / len(stack)
    return out


@dataclass
class LossScaler:
    """Dynamic loss-scaling state machine (the control logic of AMP).

    The scale halves on overflow and doubles after ``growth_interval``
    consecutive finite steps. No half-precision arithmetic is emulated.
    """

    scale: float = float(2**15)
    growth_interval: int = 2000
    growth_factor: float = 2.0
    backoff_factor: float = 0.5
    good_steps: int = 0

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be > 0")


def loss_scaler_update(scaler: LossScaler, overflow: bool) -> LossScaler:
    """Next scaler state after one step; the optimizer step is skipped on overflow."""
    if overflow:
        return replace(scaler, scale=scaler.scale * scaler.backoff_factor, good_steps=0)
    good = scaler.good_steps + 1
    if good >= scaler.growth_interval:
        return replace(scaler, scale=scaler.scale * scaler.growth_factor, good_steps=0)
    return replace(scaler, good_steps=good)


@dataclass
class EarlyStopping:
    """Stop after ``patience`` evaluations without a strictly better metric."""

    patience: int = 3
    best_metric: float = math.inf
    best_step: int = -1
    bad_evals: int = 0
    stopped: bool = False

    def update(self, metric: float, step: int) -> bool:
        """Record one evaluation; returns True when training should stop."""
        if not math.isfinite(metric):
            raise ValueError("early-stopping metric must be finite")
        if metric < self.best_metric:
            self.best_metric = metric
            self.best_step = step
            self.bad_evals = 0
        else:
            self.bad_evals += 1
            if self.bad_evals >= self.patience:
                self.stopped = True
        return self.stopped


def early_stop_update(state: EarlyStopping, new_metric: float, step: int = 0) -> str:
    """Functional wrapper: returns "continue" or "stop"."""
    return "stop" if state.update(new_metric, step) else "continue"
