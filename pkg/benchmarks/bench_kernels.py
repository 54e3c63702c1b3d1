"""Benchmark the numba kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--steps N] [--source-len L] [--repeat R]
"""

import argparse
import time

import numpy as np

from tracelens.kernels import _numba, _numpy


def build_nucleus_workload(rng, n_steps):
    lengths = rng.integers(8, 48, size=n_steps)
    offsets = np.zeros(n_steps + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    probs = np.empty(offsets[-1])
    for i in range(n_steps):
        seg = rng.random(lengths[i]) + 1e-6
        probs[offsets[i] : offsets[i + 1]] = np.sort(seg / seg.sum())[::-1]
    return probs, offsets


def bench(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        started = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - started)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--steps", type=int, default=200_000)
    parser.add_argument("--source-len", type=int, default=800)
    parser.add_argument("--rows", type=int, default=20_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    probs, offsets = build_nucleus_workload(rng, args.steps)
    matrix = rng.random((args.rows, args.source_len))
    matrix /= matrix.sum(axis=1, keepdims=True)
    keep = rng.random(args.source_len) > 0.05
    source_ids = rng.integers(0, 5_000, size=args.source_len)
    target_ids = rng.integers(-1, 5_000, size=(args.rows, 4))

    cases = {
        f"nucleus_entropy_batch ({args.steps} steps)": (
            lambda impl: impl.nucleus_entropy_batch(probs, offsets, 0.95)
        ),
        f"blocked_row_entropies ({args.rows}x{args.source_len})": (
            lambda impl: impl.blocked_row_entropies(matrix, keep)
        ),
        f"vocab_projection_batch ({args.rows}x{args.source_len}x4)": (
            lambda impl: impl.vocab_projection_batch(matrix, keep, source_ids, target_ids)
        ),
    }

    # warm the JIT before timing
    for fn in cases.values():
        fn(_numba)

    print(f"{'kernel':<44} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for name, fn in cases.items():
        t_np = bench(lambda: fn(_numpy), args.repeat)
        t_nb = bench(lambda: fn(_numba), args.repeat)
        print(f"{name:<44} {t_np:>9.4f}s {t_nb:>9.4f}s {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
