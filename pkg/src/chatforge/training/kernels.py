"""Hot numeric kernels for the tiny language model.

Two interchangeable backends compute the fused forward/backward pass, eval
NLLs, sampling probabilities, and the Adam parameter update:

* ``numba`` - loop kernels compiled with ``@njit(cache=True)``; the default
  whenever numba imports.
* ``numpy`` - vectorized fallback, always available.

``CHATFORGE_KERNELS=numpy`` (or ``numba``) pins the choice at import time.
Both backends implement identical math; results agree to float64 rounding.
``benchmarks/bench_kernels.py`` times one against the other.
"""

from __future__ import annotations

import math
import os
from typing import Callable, NamedTuple

import numpy as np

_ENV_VAR = "CHATFORGE_KERNELS"

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without the accel extra
    _HAVE_NUMBA = False


class KernelImpl(NamedTuple):
    name: str
    fused_train_step: Callable
    token_nll: Callable
    probs_forward: Callable
    adam_update: Callable


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------


def _np_logits(W1, W2, A, B, scaling, use_lora, x, keep_mask):
    h_pre = np.tanh(W1[:, x].T)  # (m, h)
    h_drop = h_pre * keep_mask if keep_mask is not None else h_pre
    logits = h_drop @ W2.T
    if use_lora:
        u = h_drop @ A.T
        logits = logits + scaling * (u @ B.T)
    else:
        u = None
    return h_pre, h_drop, u, logits


def _np_fused_train_step(W1, W2, A, B, scaling, use_lora, x, y, smooth_eps, keep_mask):
    m = x.shape[0]
    n_classes = W2.shape[0]
    h_pre, h_drop, u, logits = _np_logits(W1, W2, A, B, scaling, use_lora, x, keep_mask)
    row_max = logits.max(axis=1, keepdims=True)
    ex = np.exp(logits - row_max)
    z = ex.sum(axis=1, keepdims=True)
    log_z = (np.log(z) + row_max).ravel()
    rows = np.arange(m)
    nll = float(np.mean(log_z - logits[rows, y]))
    loss = float(
        np.mean(
            log_z
            - (smooth_eps / n_classes) * logits.sum(axis=1)
            - (1.0 - smooth_eps) * logits[rows, y]
        )
    )

    d_logits = ex / z  # softmax probabilities
    d_logits -= smooth_eps / n_classes
    d_logits[rows, y] -= 1.0 - smooth_eps
    d_logits /= m

    g_w2 = d_logits.T @ h_drop
    d_hidden = d_logits @ W2
    if use_lora:
        g_b = scaling * (d_logits.T @ u)
        t = d_logits @ B
        g_a = scaling * (t.T @ h_drop)
        d_hidden = d_hidden + scaling * (t @ A)
    else:
        g_a = np.zeros_like(A)
        g_b = np.zeros_like(B)
    d_hidden = d_hidden * keep_mask
    d_pre = (1.0 - h_pre * h_pre) * d_hidden

    g_w1_t = np.zeros((W1.shape[1], W1.shape[0]))
    np.add.at(g_w1_t, x, d_pre)
    return loss, nll, np.ascontiguousarray(g_w1_t.T), g_w2, g_a, g_b


def _np_token_nll(W1, W2, A, B, scaling, use_lora, x, y):
    _, _, _, logits = _np_logits(W1, W2, A, B, scaling, use_lora, x, None)
    row_max = logits.max(axis=1, keepdims=True)
    log_z = (np.log(np.exp(logits - row_max).sum(axis=1, keepdims=True)) + row_max).ravel()
    return log_z - logits[np.arange(x.shape[0]), y]


def _np_probs_forward(W1, W2, A, B, scaling, use_lora, x):
    _, _, _, logits = _np_logits(W1, W2, A, B, scaling, use_lora, x, None)
    ex = np.exp(logits - logits.max(axis=1, keepdims=True))
    return ex / ex.sum(axis=1, keepdims=True)


def _np_adam_update(p, g, m, v, t, lr, beta1, beta2, eps, weight_decay):
    if weight_decay != 0.0:
        p *= 1.0 - lr * weight_decay
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    p -= lr * m_hat / (np.sqrt(v_hat) + eps)


_NUMPY_IMPL = KernelImpl(
    name="numpy",
    fused_train_step=_np_fused_train_step,
    token_nll=_np_token_nll,
    probs_forward=_np_probs_forward,
    adam_update=_np_adam_update,
)


# ---------------------------------------------------------------------------
# numba backend (module-level defs so @njit(cache=True) can persist)
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:

    @_njit(cache=True)
    def _nb_logits_row(W1, W2, A, B, scaling, use_lora, xi, keep_row, h_pre, h_drop):
        hidden = W1.shape[0]
        n_out = W2.shape[0]
        for j in range(hidden):
            h_pre[j] = math.tanh(W1[j, xi])
            h_drop[j] = h_pre[j] * keep_row[j]
        logits = np.empty(n_out)
        for k in range(n_out):
            acc = 0.0
            for j in range(hidden):
                acc += W2[k, j] * h_drop[j]
            logits[k] = acc
        r = A.shape[0]
        u = np.zeros(r)
        if use_lora:
            for a in range(r):
                acc = 0.0
                for j in range(hidden):
                    acc += A[a, j] * h_drop[j]
                u[a] = acc
            for k in range(n_out):
                acc = 0.0
                for a in range(r):
                    acc += B[k, a] * u[a]
                logits[k] += scaling * acc
        return logits, u

    @_njit(cache=True)
    def _nb_fused_train_step(W1, W2, A, B, scaling, use_lora, x, y, smooth_eps, keep_mask):
        m = x.shape[0]
        hidden = W1.shape[0]
        n_out = W2.shape[0]
        r = A.shape[0]
        g_w1 = np.zeros(W1.shape)
        g_w2 = np.zeros(W2.shape)
        g_a = np.zeros(A.shape)
        g_b = np.zeros(B.shape)
        loss = 0.0
        nll = 0.0
        h_pre = np.empty(hidden)
        h_drop = np.empty(hidden)
        inv_m = 1.0 / m
        for i in range(m):
            logits, u = _nb_logits_row(
                W1, W2, A, B, scaling, use_lora, x[i], keep_mask[i], h_pre, h_drop
            )
            row_max = logits[0]
            for k in range(1, n_out):
                if logits[k] > row_max:
                    row_max = logits[k]
            z = 0.0
            logit_sum = 0.0
            for k in range(n_out):
                z += math.exp(logits[k] - row_max)
                logit_sum += logits[k]
            log_z = math.log(z) + row_max
            nll += (log_z - logits[y[i]]) * inv_m
            loss += (
                log_z - (smooth_eps / n_out) * logit_sum - (1.0 - smooth_eps) * logits[y[i]]
            ) * inv_m

            d_logits = np.empty(n_out)
            for k in range(n_out):
                d_logits[k] = (math.exp(logits[k] - row_max) / z - smooth_eps / n_out) * inv_m
            d_logits[y[i]] -= (1.0 - smooth_eps) * inv_m

            d_hidden = np.zeros(hidden)
            for k in range(n_out):
                dk = d_logits[k]
                for j in range(hidden):
                    g_w2[k, j] += dk * h_drop[j]
                    d_hidden[j] += dk * W2[k, j]
            if use_lora:
                t_vec = np.zeros(r)
                for k in range(n_out):
                    dk = d_logits[k]
                    for a in range(r):
                        g_b[k, a] += scaling * dk * u[a]
                        t_vec[a] += dk * B[k, a]
                for a in range(r):
                    ta = t_vec[a]
                    for j in range(hidden):
                        g_a[a, j] += scaling * ta * h_drop[j]
                        d_hidden[j] += scaling * ta * A[a, j]
            xi = x[i]
            for j in range(hidden):
                g_w1[j, xi] += (1.0 - h_pre[j] * h_pre[j]) * d_hidden[j] * keep_mask[i, j]
        return loss, nll, g_w1, g_w2, g_a, g_b

    @_njit(cache=True)
    def _nb_token_nll(W1, W2, A, B, scaling, use_lora, x, y):
        m = x.shape[0]
        hidden = W1.shape[0]
        n_out = W2.shape[0]
        out = np.empty(m)
        h_pre = np.empty(hidden)
        h_drop = np.empty(hidden)
        ones = np.ones(hidden)
        for i in range(m):
            logits, _ = _nb_logits_row(
                W1, W2, A, B, scaling, use_lora, x[i], ones, h_pre, h_drop
            )
            row_max = logits[0]
            for k in range(1, n_out):
                if logits[k] > row_max:
                    row_max = logits[k]
            z = 0.0
            for k in range(n_out):
                z += math.exp(logits[k] - row_max)
            out[i] = math.log(z) + row_max - logits[y[i]]
        return out

    @_njit(cache=True)
    def _nb_probs_forward(W1, W2, A, B, scaling, use_lora, x):
        m = x.shape[0]
        hidden = W1.shape[0]
        n_out = W2.shape[0]
        out = np.empty((m, n_out))
        h_pre = np.empty(hidden)
        h_drop = np.empty(hidden)
        ones = np.ones(hidden)
        for i in range(m):
            logits, _ = _nb_logits_row(
                W1, W2, A, B, scaling, use_lora, x[i], ones, h_pre, h_drop
            )
            row_max = logits[0]
            for k in range(1, n_out):
                if logits[k] > row_max:
                    row_max = logits[k]
            z = 0.0
            for k in range(n_out):
                out[i, k] = math.exp(logits[k] - row_max)
                z += out[i, k]
            for k in range(n_out):
                out[i, k] /= z
        return out

    @_njit(cache=True)
    def _nb_adam_update(p, g, m, v, t, lr, beta1, beta2, eps, weight_decay):
        bc1 = 1.0 - beta1**t
        bc2 = 1.0 - beta2**t
        decay = 1.0 - lr * weight_decay
        for i in range(p.shape[0]):
            if weight_decay != 0.0:
                p[i] *= decay
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
            p[i] -= lr * (m[i] / bc1) / (math.sqrt(v[i] / bc2) + eps)


def numpy_impl() -> KernelImpl:
    return _NUMPY_IMPL


def numba_impl() -> KernelImpl:
    """The numba backend; raises ImportError when numba is unavailable."""
    if not _HAVE_NUMBA:
        raise ImportError("numba is not installed; set CHATFORGE_KERNELS=numpy")
    return KernelImpl(
        name="numba",
        fused_train_step=_nb_fused_train_step,
        token_nll=_nb_token_nll,
        probs_forward=_nb_probs_forward,
        adam_update=_nb_adam_update,
    )


def _select() -> KernelImpl:
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice not in ("", "numba", "numpy"):
        raise ValueError(f"{_ENV_VAR} must be 'numba' or 'numpy', not {choice!r}")
    if choice == "numpy":
        return _NUMPY_IMPL
    if _HAVE_NUMBA:
        return numba_impl()
    if choice == "numba":
        raise ImportError("CHATFORGE_KERNELS=numba but numba is not installed")
    return _NUMPY_IMPL


ACTIVE: KernelImpl = _select()
BACKEND: str = ACTIVE.name

fused_train_step = ACTIVE.fused_train_step
token_nll = ACTIVE.token_nll
probs_forward = ACTIVE.probs_forward
adam_update = ACTIVE.adam_update
