"""Benchmark the numba kernels against the pure-numpy fallback.

Run:  python bench/bench_kernels.py

The same comparison is what the TARIFF_OPT_NO_NUMBA=1 environment flag
switches at import time; the sizes below match the hot paths (per-day band
projections inside scenario reduction, mean shift over 1000 deterministic
objectives, the nearest-date search, synthetic demand generation).
"""

from __future__ import annotations

import time

import numpy as np

from tariff_opt.kernels import numpy_impl

try:
    from tariff_opt.kernels import numba_impl
except ImportError:
    numba_impl = None


def best_of(fn, repeats=7):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def make_cases(rng):
    cases = []

    z_days = [rng.normal(0.01, 0.003, 48) for _ in range(31 * 100)]

    def projection(impl):
        for z in z_days:
            impl.project_sum_box(z, 48 * 0.01, 0.0075, 0.0125)

    cases.append(("project_sum_box (3100 day bands)", projection))

    f_vals = np.sort(rng.normal(500.0, 40.0, 1000))

    def mean_shift(impl):
        impl.mean_shift_modes_1d(f_vals, 12.0, 1e-8, 500)

    cases.append(("mean_shift_modes_1d (1000 pts)", mean_shift))

    a = rng.normal(size=(300, 48))
    b = rng.normal(size=(1460, 48))

    def dists(impl):
        impl.pairwise_sq_dists(a, b)

    cases.append(("pairwise_sq_dists (300x1460x48)", dists))

    seed_block = rng.uniform(150, 250, 336)
    exog = rng.normal(45, 3, 48 * 365)
    noise = rng.normal(0, 8, 48 * 365)

    def demand(impl):
        impl.simulate_demand(seed_block, exog, 0.35, 0.25, 0.2, noise)

    cases.append(("simulate_demand (1 year)", demand))
    return cases


def main():
    rng = np.random.default_rng(0)
    cases = make_cases(rng)
    if numba_impl is not None:
        for _, fn in cases:
            fn(numba_impl)  # trigger JIT compilation outside the timing
    header = f"{'kernel':40s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}"
    print(header)
    print("-" * len(header))
    for name, fn in cases:
        t_np = best_of(lambda: fn(numpy_impl))
        if numba_impl is None:
            print(f"{name:40s} {t_np * 1e3:10.2f}ms {'n/a':>12s} {'n/a':>9s}")
            continue
        t_nb = best_of(lambda: fn(numba_impl))
        print(f"{name:40s} {t_np * 1e3:10.2f}ms {t_nb * 1e3:10.2f}ms {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
