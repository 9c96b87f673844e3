#!/usr/bin/env python3
"""Benchmark the compiled joint-posterior kernel against the numpy fallback.

Times prop2_means over observation sizes spanning the two bundled
scenarios.  Run after `pip install -e .`:

    python3 scripts/benchmark_kernels.py
"""
import time

import numpy as np

from probeq import StockParams
from probeq import _kernels_py
from probeq.queuedist import _prop2_factors, default_n_max

try:
    from probeq import _kernels
except ImportError:
    _kernels = None

CASES = [
    ("s1-like p=0.3", StockParams(lambdas=(0.25, 0.25, 0.25), r=60.0, p=0.3, m=16, x_p=14)),
    ("s1-like p=0.9", StockParams(lambdas=(0.25, 0.25, 0.25), r=60.0, p=0.9, m=17, x_p=40)),
    ("s2-like p=0.3", StockParams(lambdas=(0.35, 0.075, 0.075), r=60.0, p=0.3, m=18, x_p=9)),
    ("s2-like p=0.9", StockParams(lambdas=(0.35, 0.075, 0.075), r=60.0, p=0.9, m=21, x_p=27)),
]


def time_backend(mod, params, repeats=5):
    n_max = default_n_max(max(params.mu), params.m, params.x_p)
    (ga, gb, gc), btab = _prop2_factors(params, n_max)
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = mod.prop2_zmom(ga, gb, gc, btab, params.m, params.x_p)
        best = min(best, time.perf_counter() - t0)
    return best, out, n_max


def main():
    print(f"{'case':16s} {'n_max':>6s} {'numpy':>10s} {'cython':>10s} {'speedup':>8s}")
    for label, params in CASES:
        t_py, out_py, n_max = time_backend(_kernels_py, params)
        if _kernels is None:
            print(f"{label:16s} {n_max:6d} {t_py * 1e3:9.2f}ms {'n/a':>10s} {'n/a':>8s}")
            continue
        t_c, out_c, _ = time_backend(_kernels, params)
        gaps = [abs(a / b - 1.0) for a, b in zip(out_py, out_c) if b]
        assert max(gaps) < 1e-9, f"backend mismatch on {label}: {gaps}"
        print(f"{label:16s} {n_max:6d} {t_py * 1e3:9.2f}ms {t_c * 1e3:9.2f}ms "
              f"{t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
