#!/usr/bin/env python3
"""Benchmark the compiled kernels against their pure-numpy fallbacks.

Runs both implementations of each hot kernel on identical inputs, checks
that they agree, and reports per-call timings and the compiled speedup.
The package-level backend switch (CVBELL_NUMBA) selects which of the two
an installed package actually uses; this script always measures both.

Usage:
    python3 benchmarks/bench_kernels.py [--samples N] [--boot N]
                                        [--period N] [--reps N]
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from cvbell import kernels


def time_call(fn, args, reps: int, warmup: int) -> tuple[float, float]:
    """Mean and sample std of `reps` timed calls, after `warmup` calls."""
    for _ in range(warmup):
        fn(*args)
    samples = []
    for _ in range(reps):
        start = time.perf_counter()
        fn(*args)
        samples.append(time.perf_counter() - start)
    spread = statistics.stdev(samples) if reps > 1 else 0.0
    return statistics.mean(samples), spread


def report(label: str, timings: dict[str, tuple[float, float]]) -> None:
    print(f"\n{label}")
    for backend, (mean, spread) in timings.items():
        print(f"  {backend:<6} {mean * 1e3:9.2f} ms +/- {spread * 1e3:6.2f} ms")
    if "numba" in timings and "numpy" in timings:
        speedup = timings["numpy"][0] / timings["numba"][0]
        print(f"  numba speedup: {speedup:.1f}x")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=200_000,
                        help="rows per record block (default 200000)")
    parser.add_argument("--boot", type=int, default=200,
                        help="bootstrap replicates (default 200)")
    parser.add_argument("--period", type=int, default=4096,
                        help="chop period length (default 4096)")
    parser.add_argument("--reps", type=int, default=5,
                        help="timed repetitions per backend (default 5)")
    parser.add_argument("--warmup", type=int, default=2,
                        help="untimed calls per backend (default 2)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    n = args.samples
    # Same shapes the analysis pipeline feeds the kernels: a 12-column
    # product matrix per setting block, and 4-detector record blocks.
    products = rng.normal(size=(n, 12))
    key = kernels.stream_key(args.seed, 0)
    signal = rng.normal(size=(n, 4))
    shot = rng.normal(size=(n, 4))
    dark = 0.13 * rng.normal(size=(n, 4))

    print(f"rows = {n}, replicates = {args.boot}, period = {args.period}, "
          f"reps = {args.reps} (+{args.warmup} warmup)")
    if not kernels.HAS_NUMBA:
        print("numba is not importable; timing the numpy fallback only")

    boot_variants = {
        "numpy": lambda: kernels._bootstrap_means_numpy(products, key, args.boot)
    }
    norm_variants = {
        "numpy": lambda: kernels._normalize_numpy(signal, shot, dark, args.period)
    }
    if kernels.HAS_NUMBA:
        boot_variants["numba"] = lambda: kernels._bootstrap_means_numba(
            products, np.uint64(key), np.int64(args.boot)
        )
        norm_variants["numba"] = lambda: kernels._normalize_numba(
            signal, shot, dark, np.int64(args.period)
        )
        # Backends must agree before their timings mean anything; atol
        # covers summation-order noise on near-zero column means.
        np.testing.assert_allclose(
            boot_variants["numba"](), boot_variants["numpy"](),
            rtol=1e-12, atol=1e-14,
        )
        out_nb, sigma_nb = norm_variants["numba"]()
        out_np, sigma_np = norm_variants["numpy"]()
        np.testing.assert_allclose(out_nb, out_np, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(sigma_nb, sigma_np, rtol=1e-12, atol=1e-14)
        print("backend agreement: OK (rtol 1e-12)")

    report(
        f"bootstrap_means ({n} x 12 -> {args.boot} replicates)",
        {name: time_call(fn, (), args.reps, args.warmup)
         for name, fn in boot_variants.items()},
    )
    report(
        f"normalize_by_period ({n} x 4, period {args.period})",
        {name: time_call(fn, (), args.reps, args.warmup)
         for name, fn in norm_variants.items()},
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
