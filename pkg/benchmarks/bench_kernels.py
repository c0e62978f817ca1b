#!/usr/bin/env python3
"""Benchmark the compiled kernels against their pure-Python fallbacks.

Run after `python setup.py build_ext --inplace`:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from atclab._kernels import BACKEND, pure

try:
    from atclab._kernels import _speedups
except ImportError:
    _speedups = None


def timeit(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_alignment(impl, n_pairs=400, length=30, seed=0):
    rng = np.random.default_rng(seed)
    pairs = [(rng.integers(0, 40, length), rng.integers(0, 40, length))
             for _ in range(n_pairs)]

    def run():
        for r, h in pairs:
            impl.align_ops(r, h)

    return timeit(run)


def bench_upsample(impl, n_samples=480_000, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.9, 0.9, n_samples)
    k = np.arange(48)
    taps = np.sinc(k - 23.5) * np.sin(np.pi * (2 * k + 1) / 96) ** 2
    taps /= taps.sum()
    return timeit(impl.upsample2, x, taps)


def main():
    print(f"selected backend: {BACKEND}")
    rows = [("alignment DP (400 pairs of 30 words)", bench_alignment),
            ("upsampler (60 s of 8 kHz audio)", bench_upsample)]
    impls = [("pure", pure)]
    if _speedups is not None:
        impls.append(("compiled", _speedups))
    header = f"{'kernel':<40}" + "".join(f"{name:>12}" for name, _ in impls)
    print(header)
    print("-" * len(header))
    for label, bench in rows:
        cells = []
        times = {}
        for name, impl in impls:
            times[name] = bench(impl)
            cells.append(f"{times[name] * 1e3:>10.1f}ms")
        line = f"{label:<40}" + "".join(cells)
        if "compiled" in times:
            line += f"   ({times['pure'] / times['compiled']:.1f}x)"
        print(line)


if __name__ == "__main__":
    main()
