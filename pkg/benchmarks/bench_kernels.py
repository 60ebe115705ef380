#!/usr/bin/env python3
"""Benchmark the compiled QP kernels against the pure-Python fallback.

Times the active-set solver and the grid oracle on identical random
problem batches, reports throughput for both backends, and cross-checks
that they agree. Run from the repository root:

    python3 benchmarks/bench_kernels.py [--problems N]
"""

import argparse
import math
import time

import numpy as np

from rollguard._kernels import fallback

try:
    from rollguard._kernels import _qpcore as compiled
except ImportError:
    compiled = None


def make_batch(n, seed=0):
    rng = np.random.default_rng(seed)
    batch = []
    for _ in range(n):
        lo = (rng.uniform(-3, -0.5), rng.uniform(-3, -0.5))
        hi = (rng.uniform(0.5, 3), rng.uniform(0.5, 3))
        u0 = (rng.uniform(lo[0] + 0.2, hi[0] - 0.2),
              rng.uniform(lo[1] + 0.2, hi[1] - 0.2))
        a_flat, b = [], []
        for _ in range(rng.integers(0, 3)):
            theta = rng.uniform(0, 2 * np.pi)
            scale = rng.uniform(0.5, 5.0)
            a = (scale * math.cos(theta), scale * math.sin(theta))
            a_flat.extend(a)
            b.append(a[0] * u0[0] + a[1] * u0[1] - scale * rng.uniform(0.05, 0.8))
        batch.append((rng.uniform(-4, 4), rng.uniform(-4, 4),
                      tuple(a_flat), tuple(b), lo, hi))
    return batch


def bench(fn, batch):
    start = time.perf_counter()
    out = [fn(*args) for args in batch]
    return time.perf_counter() - start, out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--problems", type=int, default=2000)
    args = parser.parse_args()

    batch = make_batch(args.problems)
    impls = [("python", fallback)]
    if compiled is not None:
        impls.append(("compiled", compiled))
    else:
        print("compiled kernel not built (python setup.py build_ext --inplace)")

    print(f"{args.problems} random problems per kernel\n")
    print(f"{'kernel':<12} {'backend':<10} {'total s':>9} {'per call us':>12}")
    results = {}
    for kernel, attr in (("solve", "solve_active_set"), ("oracle", "grid_min")):
        for name, impl in impls:
            elapsed, out = bench(getattr(impl, attr), batch)
            results[(kernel, name)] = out
            print(f"{kernel:<12} {name:<10} {elapsed:>9.3f} "
                  f"{1e6 * elapsed / len(batch):>12.1f}")

    if compiled is not None:
        worst_solve = max(
            max(abs(a[0] - b[0]), abs(a[1] - b[1]))
            for a, b in zip(results[("solve", "python")],
                            results[("solve", "compiled")]))
        worst_oracle = max(
            abs(a[1] - b[1]) / (1.0 + abs(a[1]))
            for a, b in zip(results[("oracle", "python")],
                            results[("oracle", "compiled")]))
        print(f"\nbackend agreement: solve max |du| = {worst_solve:.3e}, "
              f"oracle max rel gap = {worst_oracle:.3e}")
        assert worst_solve < 1e-9 and worst_oracle < 1e-9


if __name__ == "__main__":
    main()
