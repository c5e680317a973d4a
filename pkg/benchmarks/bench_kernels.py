#!/usr/bin/env python3
"""Benchmark the compiled transport kernels against the pure-numpy fallback.

Run after building the extension:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from embadapt._kernels import _pure

try:
    from embadapt._kernels import _core
except ImportError:
    _core = None


def unit_rows(rng, n, m):
    x = rng.normal(size=(n, m))
    return np.ascontiguousarray(x / np.linalg.norm(x, axis=1, keepdims=True))


def time_call(fn, *args, repeats=5):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    rng = np.random.default_rng(0)
    print(f"{'kernel':<34}{'size':<14}{'pure':>10}{'compiled':>10}{'speedup':>9}")
    for n, m, dim in [(32, 32, 32), (100, 100, 32), (100, 100, 768), (300, 300, 64)]:
        x = unit_rows(rng, n, dim)
        y = unit_rows(rng, m, dim)
        t_pure = time_call(_pure.pairwise_sq_dists, x, y)
        if _core is not None:
            t_core = time_call(_core.pairwise_sq_dists, x, y)
            ratio = f"{t_pure / t_core:8.1f}x"
        else:
            t_core, ratio = float("nan"), "     n/a"
        print(
            f"{'pairwise_sq_dists':<34}{f'{n}x{m}x{dim}':<14}"
            f"{t_pure * 1e3:9.2f}ms{t_core * 1e3:8.2f}ms{ratio}"
        )

    for n, m in [(20, 20), (64, 64), (100, 100), (200, 200)]:
        x = unit_rows(rng, n, 32)
        y = unit_rows(rng, m, 32)
        diff = x[:, None, :] - y[None, :, :]
        cost = np.exp(np.einsum("abk,abk->ab", diff, diff) / 2.0)
        a = np.full(n, 1.0 / n)
        b = np.full(m, 1.0 / m)
        args = (np.ascontiguousarray(cost), a, b, 10.0, 300, 1e-6)
        t_pure = time_call(_pure.sinkhorn_log, *args)
        if _core is not None:
            t_core = time_call(_core.sinkhorn_log, *args)
            ratio = f"{t_pure / t_core:8.1f}x"
        else:
            t_core, ratio = float("nan"), "     n/a"
        print(
            f"{'sinkhorn_log (300 iters)':<34}{f'{n}x{m}':<14}"
            f"{t_pure * 1e3:9.2f}ms{t_core * 1e3:8.2f}ms{ratio}"
        )


if __name__ == "__main__":
    main()
