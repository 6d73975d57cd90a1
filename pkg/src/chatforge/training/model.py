"""Tiny two-matrix language model with optional low-rank adaptation.

The model predicts the next token from the previous one: a column of W1 is
looked up per input token, squashed with tanh, and projected to vocabulary
logits by W2 (optionally corrected by a LoRA pair on W2). Small enough that
every training-control mechanism stays testable in seconds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels

PARAM_GROUPS = ("W1", "W2")


@dataclass
class LoraAdapter:
    """Low-rank correction (alpha/rank) * B @ A added to a frozen base matrix."""

    rank: int = 8
    alpha: float = 32.0
    A: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    B: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    merged: bool = False

    @property
    def scaling(self) -> float:
        return self.alpha / self.rank

    @classmethod
    def init(
        cls,
        d_out: int,
        d_in: int,
        rank: int = 8,
        alpha: float = 32.0,
        rng: Optional[np.random.Generator] = None,
    ) -> "LoraAdapter":
        """A gets small random entries, B starts at exactly zero."""
        rng = rng or np.random.default_rng(0)
        a = rng.normal(0.0, 1.0 / np.sqrt(d_in), size=(rank, d_in))
        b = np.zeros((d_out, rank))
        return cls(rank=rank, alpha=alpha, A=a, B=b)


def _check_compose(base: np.ndarray, adapter: LoraAdapter) -> None:
    d_out, d_in = base.shape
    if adapter.A.shape != (adapter.rank, d_in) or adapter.B.shape != (d_out, adapter.rank):
        raise ValueError(
            f"adapter shapes A{adapter.A.shape} B{adapter.B.shape} do not compose "
            f"with base {base.shape}"
        )


def lora_forward(base: np.ndarray, adapter: LoraAdapter, x: np.ndarray) -> np.ndarray:
    """base @ x + scaling * B @ (A @ x); the base matrix is never modified."""
    _check_compose(base, adapter)
    if x.shape[0] != base.shape[1]:
        raise ValueError(f"input of length {x.shape[0]} does not match base {base.shape}")
    return base @ x + adapter.scaling * (adapter.B @ (adapter.A @ x))


def merge_lora(base: np.ndarray, adapter: LoraAdapter) -> np.ndarray:
    """Return base + scaling * B @ A for deployment.

    Merging the same adapter twice would add the correction twice, so the
    adapter carries a ``merged`` flag and a second merge is refused.
    """
    _check_compose(base, adapter)
    if adapter.merged:
        raise RuntimeError("adapter has already been merged into a base matrix")
    adapter.merged = True
    return base + adapter.scaling * (adapter.B @ adapter.A)


class TinyLM:
    """Next-token model: softmax(W2 @ tanh(W1[:, x])), optionally LoRA on W2.

    W2 starts at zero so an untrained model is exactly uniform over the
    vocabulary. Parameter groups "W1" and "W2" carry individual frozen
    flags; an attached adapter is always trainable.
    """

    def __init__(
        self,
        vocab_size: int,
        hidden: int = 32,
        seed: int = 0,
        input_scale: float = 0.5,
    ):
        if vocab_size < 2 or hidden < 1:
            raise ValueError("need vocab_size >= 2 and hidden >= 1")
        rng = np.random.default_rng(seed)
        self.vocab_size = vocab_size
        self.hidden = hidden
        self.W1 = rng.normal(0.0, input_scale, size=(hidden, vocab_size))
        self.W2 = np.zeros((vocab_size, hidden))
        self.frozen: dict[str, bool] = {"W1": False, "W2": False}
        self.adapter: Optional[LoraAdapter] = None

    # -- adapter plumbing ---------------------------------------------------

    def attach_adapter(self, adapter: LoraAdapter) -> None:
        _check_compose(self.W2, adapter)
        self.adapter = adapter

    def _kernel_args(self):
        if self.adapter is not None:
            return self.W2, self.adapter.A, self.adapter.B, self.adapter.scaling, True
        dummy_a = np.zeros((0, self.hidden))
        dummy_b = np.zeros((self.vocab_size, 0))
        return self.W2, dummy_a, dummy_b, 0.0, False

    # -- inference ----------------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Probability rows for a batch of input token indices."""
        x = np.asarray(x, dtype=np.int64)
        w2, a, b, scaling, use_lora = self._kernel_args()
        return kernels.probs_forward(self.W1, w2, a, b, scaling, use_lora, x)

    def token_nlls(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Per-token negative log-likelihoods of targets y given inputs x."""
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        w2, a, b, scaling, use_lora = self._kernel_args()
        return kernels.token_nll(self.W1, w2, a, b, scaling, use_lora, x, y)

    def loss_and_grads(
        self,
        x: np.ndarray,
        y: np.ndarray,
        label_smoothing: float = 0.0,
        keep_mask: Optional[np.ndarray] = None,
    ) -> tuple[float, float, dict[str, np.ndarray]]:
        """Mean smoothed loss, mean raw NLL, and gradients by group name."""
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        if keep_mask is None:
            keep_mask = np.ones((x.shape[0], self.hidden))
        w2, a, b, scaling, use_lora = self._kernel_args()
        loss, nll, g_w1, g_w2, g_a, g_b = kernels.fused_train_step(
            self.W1, w2, a, b, scaling, use_lora, x, y, label_smoothing, keep_mask
        )
        grads = {"W1": g_w1, "W2": g_w2}
        if use_lora:
            grads["lora.A"] = g_a
            grads["lora.B"] = g_b
        return loss, nll, grads

    def sample(self, context: int, n_tokens: int, rng: np.random.Generator) -> list[int]:
        """Sample a continuation of n_tokens indices starting after context."""
        out = []
        current = int(context)
        for _ in range(n_tokens):
            probs = self.forward(np.array([current]))[0]
            current = int(rng.choice(self.vocab_size, p=probs / probs.sum()))
            out.append(current)
        return out

    # -- parameter access ---------------------------------------------------

    def parameters(self) -> dict[str, np.ndarray]:
        params = {"W1": self.W1, "W2": self.W2}
        if self.adapter is not None:
            params["lora.A"] = self.adapter.A
            params["lora.B"] = self.adapter.B
        return params

    def trainable_names(self) -> list[str]:
        names = [g for g in PARAM_GROUPS if not self.frozen[g]]
        if self.adapter is not None:
            names += ["lora.A", "lora.B"]
        return names

    def set_frozen(self, frozen_groups: set[str] | frozenset[str]) -> None:
        for group in PARAM_GROUPS:
            self.frozen[group] = group in frozen_groups

    def copy(self) -> "TinyLM":
        clone = TinyLM.__new__(TinyLM)
        clone.vocab_size = self.vocab_size
        clone.hidden = self.hidden
        clone.W1 = self.W1.copy()
        clone.W2 = self.W2.copy()
        clone.frozen = dict(self.frozen)
        clone.adapter = None
        if self.adapter is not None:
            clone.adapter = LoraAdapter(
                rank=self.adapter.rank,
                alpha=self.adapter.alpha,
                A=self.adapter.A.copy(),
                B=self.adapter.B.copy(),
                merged=self.adapter.merged,
            )
        return clone


# ---------------------------------------------------------------------------
# Checkpoints: one JSON header line, then little-endian float64 blobs.
# ---------------------------------------------------------------------------


def save_checkpoint(model: TinyLM, path: str | Path) -> None:
    arrays = [("W1", model.W1), ("W2", model.W2)]
    lora_meta = None
    if model.adapter is not None:
        arrays += [("lora.A", model.adapter.A), ("lora.B", model.adapter.B)]
        lora_meta = {"rank": model.adapter.rank, "alpha": model.adapter.alpha}
    header = {
        "format": "chatforge-ckpt-v1",
        "dtype": "float64",
        "byte_order": "little",
        "arrays": [{"name": name, "shape": list(arr.shape)} for name, arr in arrays],
        "model": {
            "vocab_size": model.vocab_size,
            "hidden": model.hidden,
            "frozen": model.frozen,
            "lora": lora_meta,
        },
    }
    with Path(path).open("wb") as handle:
        handle.write(json.dumps(header).encode("utf-8") + b"\n")
        for _, arr in arrays:
            handle.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> TinyLM:
    with Path(path).open("rb") as handle:
        header = json.loads(handle.readline().decode("utf-8"))
        if header.get("format") != "chatforge-ckpt-v1":
            raise ValueError(f"{path} is not a chatforge checkpoint")
        blobs = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = handle.read(count * 8)
            if len(raw) != count * 8:
                raise ValueError(f"truncated checkpoint {path}")
            blobs[spec["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    meta = header["model"]
    model = TinyLM.__new__(TinyLM)
    model.vocab_size = meta["vocab_size"]
    model.hidden = meta["hidden"]
    model.W1 = blobs["W1"]
    model.W2 = blobs["W2"]
    model.frozen = dict(meta["frozen"])
    model.adapter = None
    if meta.get("lora"):
        model.adapter = LoraAdapter(
            rank=meta["lora"]["rank"],
            alpha=meta["lora"]["alpha"],
            A=blobs["lora.A"],
            B=blobs["lora.B"],
        )
    return model
