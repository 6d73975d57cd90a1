#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the fused train step, eval NLL, sampling forward, and the Adam update
on training-shaped workloads, plus one full toy training run per backend.

Usage:
    python benchmarks/bench_kernels.py [--repeats 200]
"""

import argparse
import time

import numpy as np

from chatforge.training import LrSchedule, TinyLM, TrainingConfig, kernels, train
from chatforge.training.data import make_markov_pairs


def time_call(fn, repeats):
    fn()  # warm up (JIT compile, caches)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


WORKLOADS = {
    # micro-batch and model dims of the toy training runs
    "toy (m=32 V=16 h=32)": dict(m=32, vocab=16, hidden=32, rank=8),
    # wider shapes where BLAS-backed numpy catches up
    "wide (m=128 V=64 h=64)": dict(m=128, vocab=64, hidden=64, rank=8),
}


def kernel_workload(m, vocab, hidden, rank, seed=0):
    rng = np.random.default_rng(seed)
    return dict(
        W1=rng.normal(size=(hidden, vocab)),
        W2=rng.normal(size=(vocab, hidden)),
        A=rng.normal(size=(rank, hidden)),
        B=rng.normal(size=(vocab, rank)),
        x=rng.integers(vocab, size=m),
        y=rng.integers(vocab, size=m),
        keep=(rng.random((m, hidden)) >= 0.1) / 0.9,
    )


def bench_kernels(impl, repeats, shape):
    w = kernel_workload(**shape)
    rows = {}
    rows["fused_train_step"] = time_call(
        lambda: impl.fused_train_step(
            w["W1"], w["W2"], w["A"], w["B"], 4.0, True, w["x"], w["y"], 0.1, w["keep"]
        ),
        repeats,
    )
    rows["token_nll"] = time_call(
        lambda: impl.token_nll(w["W1"], w["W2"], w["A"], w["B"], 4.0, True, w["x"], w["y"]),
        repeats,
    )
    rows["probs_forward"] = time_call(
        lambda: impl.probs_forward(w["W1"], w["W2"], w["A"], w["B"], 4.0, True, w["x"]),
        repeats,
    )
    p = w["W1"].copy().reshape(-1)
    g = np.random.default_rng(1).normal(size=p.shape[0])
    m_buf = np.zeros_like(p)
    v_buf = np.zeros_like(p)
    rows["adam_update"] = time_call(
        lambda: impl.adam_update(p, g, m_buf, v_buf, 10, 1e-3, 0.9, 0.999, 1e-8, 0.01),
        repeats,
    )
    return rows


def bench_training(impl_name):
    # the kernel module reads its backend at import; patch the bound functions
    impl = kernels.numba_impl() if impl_name == "numba" else kernels.numpy_impl()
    saved = (kernels.fused_train_step, kernels.token_nll, kernels.probs_forward, kernels.adam_update)
    kernels.fused_train_step = impl.fused_train_step
    kernels.token_nll = impl.token_nll
    kernels.probs_forward = impl.probs_forward
    kernels.adam_update = impl.adam_update
    try:
        pairs = make_markov_pairs(n_states=16, n_tokens=10_000, seed=7)
        cfg = TrainingConfig(seed=42, epochs=3, eval_every_steps=0, dropout=0.1)
        model = TinyLM(vocab_size=16, hidden=32, seed=1)
        schedule = LrSchedule(kind="warmup_linear_decay", base_lr=0.05, warmup_steps=10)
        train(model, pairs, cfg, schedule=schedule)  # warm-up/JIT
        start = time.perf_counter()
        model = TinyLM(vocab_size=16, hidden=32, seed=1)
        train(model, pairs, cfg, schedule=schedule)
        return time.perf_counter() - start
    finally:
        (
            kernels.fused_train_step,
            kernels.token_nll,
            kernels.probs_forward,
            kernels.adam_update,
        ) = saved


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    impls = [("numpy", kernels.numpy_impl())]
    try:
        impls.append(("numba", kernels.numba_impl()))
    except ImportError:
        print("numba not installed; benchmarking the numpy fallback only\n")

    for shape_name, shape in WORKLOADS.items():
        results = {name: bench_kernels(impl, args.repeats, shape) for name, impl in impls}
        print(f"workload: {shape_name}")
        header = f"{'kernel':<18}" + "".join(f"{name + ' (us)':>14}" for name, _ in impls)
        if len(impls) == 2:
            header += f"{'speedup':>10}"
        print(header)
        print("-" * len(header))
        for kernel_name in sorted(results["numpy"]):
            row = f"{kernel_name:<18}"
            for name, _ in impls:
                row += f"{results[name][kernel_name] * 1e6:>14.1f}"
            if len(impls) == 2:
                ratio = results["numpy"][kernel_name] / results["numba"][kernel_name]
                row += f"{ratio:>9.2f}x"
            print(row)
        print()
    for name, _ in impls:
        seconds = bench_training(name)
        print(f"full toy training run ({name:>5}): {seconds * 1000:.0f} ms")


if __name__ == "__main__":
    main()
