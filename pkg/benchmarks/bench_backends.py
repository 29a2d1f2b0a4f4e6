#!/usr/bin/env python3
"""Benchmark the compiled kernel against the numpy fallback.

Times the hot operations (boundary evaluation, conservative step on random
and sweep-coherent workloads, one attractor sweep) on every available
backend and prints a comparison table.

    python3 benchmarks/bench_backends.py [--points N] [--grid C R]
"""

import argparse
import os
import time

import numpy as np


def time_call(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--grid", type=int, nargs=2, default=(256, 256))
    args = ap.parse_args()

    from billiard_lab._kernels import available_backends
    from billiard_lab.dynamics import ConstantDissipation
    from billiard_lab.geometry import EllipseSpec, make_ellipse

    curve = make_ellipse(EllipseSpec(2.0, 1.0), 1024)
    backs = available_backends()
    rng = np.random.default_rng(11)
    n = args.points
    s_rand = rng.uniform(0, curve.perimeter, n)
    r_rand = rng.uniform(-0.999, 0.999, n)
    s_coh = np.sort(s_rand)
    r_coh = np.repeat(rng.uniform(-0.9, 0.9, max(1, n // 1000)), 1000)[:n]
    theta = rng.uniform(0, 2 * np.pi, n)

    rows = []
    for name, b in sorted(backs.items()):
        ctx = b.make_ctx(curve.table)
        b.step_conservative(ctx, s_rand[:100], r_rand[:100])  # warm-up
        t_bnd = time_call(lambda: b.boundary(ctx, theta))
        t_rand = time_call(lambda: b.step_conservative(ctx, s_rand, r_rand))
        t_coh = time_call(lambda: b.step_conservative(ctx, s_coh, r_coh))
        rows.append((name, t_bnd, t_rand, t_coh))

    print(f"\n{n} points on the 2:1 ellipse (best of 3), us per point")
    print(f"{'backend':<8} {'boundary':>10} {'step rand':>10} {'step sweep':>10}")
    for name, t_bnd, t_rand, t_coh in rows:
        print(f"{name:<8} {t_bnd / n * 1e6:>10.3f} {t_rand / n * 1e6:>10.3f} "
              f"{t_coh / n * 1e6:>10.3f}")
    if len(rows) == 2:
        ref = {name: t for name, _, t, _ in rows}
        if "numpy" in ref and "cython" in ref:
            print(f"\nspeedup (random step): {ref['numpy'] / ref['cython']:.1f}x")

    # one full sweep at the requested grid
    from billiard_lab.attractor import iterate_annulus

    C, R = args.grid
    print(f"\none attractor sweep pass, {C}x{R} grid, lambda = 0.5:")
    for name in sorted(backs):
        os.environ["BILLIARD_LAB_BACKEND"] = name
        # re-import to flip the backend for the high-level path
        import importlib

        import billiard_lab._kernels as K
        importlib.reload(K)
        t = time_call(
            lambda: iterate_annulus(curve, ConstantDissipation(0.5), C, R, 2, threads=1),
            repeat=1,
        )
        print(f"{name:<8} {t:>8.2f} s (2 sweeps)")
    os.environ.pop("BILLIARD_LAB_BACKEND", None)


if __name__ == "__main__":
    main()
