"""Training harness: schedules, optimizer mechanics, LoRA, and the control loop."""

from .config import LrSchedule, TrainingConfig, UnfreezePlan, lr_at
from .data import build_vocab, make_markov_pairs, split_pairs
from .kernels import BACKEND as KERNEL_BACKEND
from .loop import (
    EvalPoint,
    TrainingHistory,
    generate_responses,
    read_history,
    scenario_monitor,
    train,
    write_manifest,
)
from .model import LoraAdapter, TinyLM, load_checkpoint, lora_forward, merge_lora, save_checkpoint
from .optim import (
    AdamState,
    EarlyStopping,
    LossScaler,
    accumulate,
    adam_step,
    clip_gradients,
    early_stop_update,
    label_smoothed_ce,
    loss_scaler_update,
)
from .tune import SearchSpace, TrialResult, tune

__all__ = [
    "AdamState",
    "EarlyStopping",
    "EvalPoint",
    "KERNEL_BACKEND",
    "LoraAdapter",
    "LossScaler",
    "LrSchedule",
    "SearchSpace",
    "TinyLM",
    "TrainingConfig",
    "TrainingHistory",
    "TrialResult",
    "UnfreezePlan",
    "accumulate",
    "adam_step",
    "build_vocab",
    "clip_gradients",
    "early_stop_update",
    "generate_responses",
    "label_smoothed_ce",
    "load_checkpoint",
    "lora_forward",
    "loss_scaler_update",
    "lr_at",
    "make_markov_pairs",
    "merge_lora",
    "read_history",
    "save_checkpoint",
    "scenario_monitor",
    "split_pairs",
    "train",
    "tune",
    "write_manifest",
]
