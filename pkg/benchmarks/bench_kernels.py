"""Benchmark the Gaussian-mixture density kernel: numba vs pure numpy.

The kernel dominates localization runtime (message weighting, belief
updates and MAP extraction all reduce to it). This script times both
implementations directly, so it is independent of the WSNLOC_NUMBA flag,
then reports an end-to-end localization comparison.

Usage: python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from wsnloc._kernels import _mixture_density_loop, _mixture_density_numpy

try:
    import numba
    _numba_impl = numba.njit(cache=True, nogil=True)(_mixture_density_loop)
except ImportError:
    _numba_impl = None


def time_call(fn, *args, repeats=200):
    fn(*args)  # warm-up / jit compile
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def bench_kernel():
    rng = np.random.default_rng(0)
    print(f"{'P x C':>12} {'numpy us':>10} {'numba us':>10} {'speedup':>8}")
    for size in (50, 100, 300, 1000):
        points = rng.uniform(0, 100, (size, 2))
        comps = rng.uniform(0, 100, (size, 2))
        weights = np.full(size, 1.0 / size)
        args = (points, comps, weights, 4.0, 0.5, 3.0)
        t_np = time_call(_mixture_density_numpy, *args)
        row = f"{size:>5} x {size:<4} {t_np * 1e6:>10.1f}"
        if _numba_impl is not None:
            t_nb = time_call(_numba_impl, *args)
            row += f" {t_nb * 1e6:>10.1f} {t_np / t_nb:>7.1f}x"
        else:
            row += f" {'n/a':>10} {'n/a':>8}"
        print(row)


def bench_end_to_end():
    from wsnloc import (MeasurementModel, NbpParams, build_scenario,
                        measure_ranges, place_anchors_preset, run_nbp)
    import wsnloc._kernels as kernels

    model = MeasurementModel(noise_sigma=1.0)
    params = NbpParams(particles_m=100, max_iterations=10)
    anchors = place_anchors_preset("edge", 9, 100, 100)
    scenario = build_scenario(100, 100, 15, 100, anchors, seed=1)
    ranges = measure_ranges(scenario, model, seed=1)

    impls = [("numpy", lambda p, c, w, cov: kernels._mixture_density_numpy(
        p, c, w, cov[0, 0], cov[0, 1], cov[1, 1]))]
    if _numba_impl is not None:
        impls.append(("numba", lambda p, c, w, cov: _numba_impl(
            p, c, w, float(cov[0, 0]), float(cov[0, 1]), float(cov[1, 1]))))

    original = kernels.mixture_density
    print("\nend-to-end: one localization run (109 nodes, M=100, 10 iterations)")
    try:
        for name, impl in impls:
            kernels.mixture_density = lambda p, c, w, cov, _f=impl: _f(
                np.ascontiguousarray(p, float), np.ascontiguousarray(c, float),
                np.ascontiguousarray(w, float), np.asarray(cov, float))
            import wsnloc.nbp as nbp_mod
            nbp_mod.mixture_density = kernels.mixture_density
            run_nbp(scenario, ranges, params, seed=1, model=model)  # warm
            t0 = time.perf_counter()
            run_nbp(scenario, ranges, params, seed=1, model=model)
            print(f"  {name:>6}: {time.perf_counter() - t0:6.2f} s")
    finally:
        kernels.mixture_density = original
        import wsnloc.nbp as nbp_mod
        nbp_mod.mixture_density = original


if __name__ == "__main__":
    bench_kernel()
    bench_end_to_end()
