"""Benchmark the numba kernels against their pure-numpy fallbacks.

Both implementations are always importable from ssaam.kernels regardless of
which backend the package dispatches to, so this script times them head to
head on the three hot paths. JIT compilation happens in an untimed warmup.

Usage:
    python benchmarks/bench_kernels.py [--grid 20000] [--t 64] [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ssaam import kernels


def _time(fn, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description="ssaam kernel benchmark, numba vs numpy")
    parser.add_argument("--grid", type=int, default=20_000, help="candidate portfolios")
    parser.add_argument("--t", type=int, default=64, help="return observations")
    parser.add_argument("--assets", type=int, default=3)
    parser.add_argument("--signal", type=int, default=100_000, help="split-scan signal length")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if not kernels.NUMBA_AVAILABLE:
        raise SystemExit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(0)
    returns = rng.normal(0.001, 0.02, size=(args.t, args.assets))
    weights = rng.dirichlet(np.ones(args.assets), size=args.grid)
    losses = rng.normal(0.0, 1.0, size=4096)
    values = rng.normal(size=args.signal)
    csum = np.concatenate(([0.0], np.cumsum(values)))
    csum2 = np.concatenate(([0.0], np.cumsum(values * values)))
    curve = np.cumprod(1 + rng.normal(0.0005, 0.02, size=args.signal)) * 100

    # warmup (JIT compile, cache load)
    kernels.evar_value_numba(losses[:16], 0.05)
    kernels.evar_batch_numba(returns, weights[:8], 0.05)
    kernels.best_l2_split_numba(csum, csum2, 0, args.signal, 2)
    kernels.max_drawdown_path_numba(curve)

    rows = [
        (
            "evar_value (T=4096)",
            lambda: kernels.evar_value_numba(losses, 0.05),
            lambda: kernels.evar_value_numpy(losses, 0.05),
        ),
        (
            f"evar_batch (G={args.grid}, T={args.t})",
            lambda: kernels.evar_batch_numba(returns, weights, 0.05),
            lambda: kernels.evar_batch_numpy(returns, weights, 0.05),
        ),
        (
            f"best_l2_split (S={args.signal})",
            lambda: kernels.best_l2_split_numba(csum, csum2, 0, args.signal, 2),
            lambda: kernels.best_l2_split_numpy(csum, csum2, 0, args.signal, 2),
        ),
        (
            f"max_drawdown_path (S={args.signal})",
            lambda: kernels.max_drawdown_path_numba(curve),
            lambda: kernels.max_drawdown_path_numpy(curve),
        ),
    ]

    print(f"{'kernel':<36}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    print("-" * 70)
    for name, fn_nb, fn_np in rows:
        t_nb = _time(fn_nb, args.repeat)
        t_np = _time(fn_np, args.repeat)
        print(f"{name:<36}{t_nb * 1e3:>10.2f}ms{t_np * 1e3:>10.2f}ms{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
