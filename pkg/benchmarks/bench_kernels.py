#!/usr/bin/env python3
"""Benchmark the hot kernels: numba-compiled vs interpreted NumPy path.

With numba enabled (default) both paths are timed in-process: the compiled
dispatcher and its original Python body (`.py_func`). Run with
CTCFUSE_NUMBA=0 to measure the fallback build end to end.

Usage: python benchmarks/bench_kernels.py [--frames 200] [--hidden 64] [--repeats 5]
"""

import argparse
import time

import numpy as np

from ctcfuse import kernels


def time_fn(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def make_cases(frames, hidden, units):
    rng = np.random.default_rng(0)
    S = 2 * units + 1
    logp = np.ascontiguousarray(np.log(rng.uniform(0.05, 1.0, size=(frames, S))))
    skip = np.zeros(S, dtype=np.bool_)
    skip[3::2] = True
    zx = rng.normal(size=(frames, 4 * hidden))
    rec = np.ascontiguousarray(rng.normal(scale=0.1, size=(4 * hidden, hidden)))
    h, c, g = kernels.lstm_forward(zx, rec)
    dh = rng.normal(size=(frames, hidden))
    rec_t = np.ascontiguousarray(rec.T)
    return {
        "ctc_forward_backward": (kernels.ctc_forward_backward, (logp, skip)),
        "lstm_forward": (kernels.lstm_forward, (zx, rec)),
        "lstm_backward": (kernels.lstm_backward, (dh, g, c, rec_t)),
    }


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--frames", type=int, default=200)
    parser.add_argument("--hidden", type=int, default=64)
    parser.add_argument("--units", type=int, default=30)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print(f"jit enabled: {kernels.JIT_ENABLED}")
    print(f"T={args.frames} H={args.hidden} U={args.units}, best of {args.repeats}\n")
    cases = make_cases(args.frames, args.hidden, args.units)

    header = f"{'kernel':24s} {'compiled':>12s} {'numpy':>12s} {'speedup':>9s}"
    print(header)
    print("-" * len(header))
    for name, (fn, fn_args) in cases.items():
        if kernels.JIT_ENABLED:
            fn(*fn_args)  # warm-up compile
            compiled = time_fn(fn, fn_args, args.repeats)
            plain = time_fn(fn.py_func, fn_args, args.repeats)
            print(f"{name:24s} {compiled * 1e3:10.3f}ms {plain * 1e3:10.3f}ms "
                  f"{plain / compiled:8.1f}x")
        else:
            plain = time_fn(fn, fn_args, args.repeats)
            print(f"{name:24s} {'-':>12s} {plain * 1e3:10.3f}ms {'':>9s}")


if __name__ == "__main__":
    main()
