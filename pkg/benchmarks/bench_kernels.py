#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Runs the two hot loops at Monte-Carlo-suite sizes and prints a timing table.
Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from ddspectro._kernels import _fallback

try:
    from ddspectro._kernels import _ckernels
except ImportError:
    _ckernels = None


def time_call(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def phasor_case(n_omega, n_seg):
    rng = np.random.default_rng(0)
    omega = np.ascontiguousarray(rng.uniform(0.0, 5e5, n_omega))
    edges = np.sort(rng.uniform(0.0, 1e-3, n_seg + 1))
    return (
        omega,
        np.diff(edges),
        0.5 * (edges[:-1] + edges[1:]),
        (-1.0) ** np.arange(n_seg),
    )


def signal_case(trials, n_cyc, m_max):
    rng = np.random.default_rng(1)
    samples = rng.standard_normal((trials, m_max * n_cyc + 1))
    weights = rng.standard_normal(n_cyc + 1) * 1e-3
    counts = np.unique(np.geomspace(1, m_max, 16).astype(np.int64))
    return samples, weights, n_cyc, counts, False


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    cases = [
        ("segment_phasor_sq  200k x 3 segments", "segment_phasor_sq", phasor_case(200_000, 3)),
        ("segment_phasor_sq  200k x 41 segments", "segment_phasor_sq", phasor_case(200_000, 41)),
        ("cycle_phase_signal 256 trials x 512 cycles x 80", "cycle_phase_signal", signal_case(256, 80, 512)),
        ("cycle_phase_signal 64 trials x 4096 cycles x 40", "cycle_phase_signal", signal_case(64, 40, 4096)),
    ]

    print(f"{'case':52s} {'numpy':>10s} {'cython':>10s} {'speedup':>8s}")
    for label, name, case_args in cases:
        t_np = time_call(getattr(_fallback, name), *case_args, repeat=args.repeat)
        if _ckernels is None:
            print(f"{label:52s} {t_np * 1e3:9.2f}ms {'n/a':>10s} {'':>8s}")
            continue
        t_cy = time_call(getattr(_ckernels, name), *case_args, repeat=args.repeat)
        ref = getattr(_fallback, name)(*case_args)
        got = getattr(_ckernels, name)(*case_args)
        if isinstance(ref, tuple):
            ok = all(np.allclose(r, g, rtol=1e-12) for r, g in zip(ref, got))
        else:
            ok = np.allclose(ref, got, rtol=1e-12)
        status = "" if ok else "  MISMATCH"
        print(
            f"{label:52s} {t_np * 1e3:9.2f}ms {t_cy * 1e3:9.2f}ms {t_np / t_cy:7.2f}x{status}"
        )
    if _ckernels is None:
        print("\ncompiled kernels not built; install with a C compiler to compare")


if __name__ == "__main__":
    main()
