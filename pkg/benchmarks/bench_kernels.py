"""Timing comparison of the jitted kernels against the numpy fallbacks.

Runs each kernel at a few batch sizes and prints the median wall time per
call plus the speedup of the jitted build.  When numba is unavailable the
script still runs and reports the numpy timings alone.

Usage::

    python3 benchmarks/bench_kernels.py [--repeats 30]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from hybridabc import kernels

HORIZON = 10
DT = 3.0
THETA = (0.057, 3.4, 2.6, 0.005)
NOISE = 0.1


def _bench(fn, args, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def _fmt(seconds: float) -> str:
    if seconds < 1e-3:
        return f"{seconds * 1e6:8.1f} us"
    return f"{seconds * 1e3:8.2f} ms"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=30,
                        help="timed calls per case; the median is reported")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    have_numba = kernels._simulate_paths_jit is not None
    if have_numba:
        kernels.warmup()
    print(f"active backend: {kernels.BACKEND}"
          + ("" if have_numba else "  (numba not installed; numpy only)"))
    print()

    rng = np.random.default_rng(args.seed)
    header = f"{'kernel':<18} {'batch':>7} {'numpy':>12} {'numba':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))

    for n in (60, 1200, 24000):
        theta = tuple(np.full(n, v) for v in THETA)
        eps = NOISE * rng.standard_normal((n, HORIZON, 2))
        sim_args = (*theta, DT, 3.0, 0.0, eps)
        t_np = _bench(kernels.simulate_paths_numpy, sim_args, args.repeats)
        if have_numba:
            t_nb = _bench(kernels.simulate_paths_numba, sim_args, args.repeats)
            print(f"{'simulate_paths':<18} {n:>7} {_fmt(t_np):>12} {_fmt(t_nb):>12} "
                  f"{t_np / t_nb:>7.1f}x")
        else:
            print(f"{'simulate_paths':<18} {n:>7} {_fmt(t_np):>12} {'-':>12} {'-':>8}")

    for n in (20, 400, 8000):
        x = rng.standard_normal((n, HORIZON + 1)).cumsum(axis=1)
        t_np = _bench(kernels.aux_summary_1d_numpy, (x,), args.repeats)
        if have_numba:
            t_nb = _bench(kernels.aux_summary_1d_numba, (x,), args.repeats)
            print(f"{'aux_summary_1d':<18} {n:>7} {_fmt(t_np):>12} {_fmt(t_nb):>12} "
                  f"{t_np / t_nb:>7.1f}x")
        else:
            print(f"{'aux_summary_1d':<18} {n:>7} {_fmt(t_np):>12} {'-':>12} {'-':>8}")


if __name__ == "__main__":
    main()
