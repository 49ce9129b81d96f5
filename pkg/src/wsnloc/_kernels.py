"""Hot numeric kernels: numba fast path with a pure-numpy fallback.

Evaluating a weighted Gaussian mixture at many points dominates the
runtime of belief propagation (message weighting, belief updates and MAP
extraction all reduce to it), and it sits inside the genetic algorithm's
fitness loop. The numba build is used when importable; set WSNLOC_NUMBA=0
to force the numpy path. ``benchmarks/bench_kernels.py`` compares the two.
"""

import os

import numpy as np

__all__ = ["BACKEND", "mixture_density", "weighted_mean_cov"]


def _mixture_density_numpy(points, comps, weights, s11, s12, s22):
    det = s11 * s22 - s12 * s12
    ia = s22 / det
    ib = -s12 / det
    ic = s11 / det
    dx = points[:, 0:1] - comps[None, :, 0]
    dy = points[:, 1:2] - comps[None, :, 1]
    q = ia * dx * dx + 2.0 * ib * dx * dy + ic * dy * dy
    return (np.exp(-0.5 * q) @ weights) / (2.0 * np.pi * np.sqrt(det))


def _mixture_density_loop(points, comps, weights, s11, s12, s22):
    det = s11 * s22 - s12 * s12
    ia = s22 / det
    ib = -s12 / det
    ic = s11 / det
    norm = 1.0 / (2.0 * np.pi * np.sqrt(det))
    out = np.empty(points.shape[0])
    for i in range(points.shape[0]):
        acc = 0.0
        px = points[i, 0]
        py = points[i, 1]
        for j in range(comps.shape[0]):
            dx = px - comps[j, 0]
            dy = py - comps[j, 1]
            q = ia * dx * dx + 2.0 * ib * dx * dy + ic * dy * dy
            if q < 1400.0:  # exp underflows to 0 long before this
                acc += weights[j] * np.exp(-0.5 * q)
        out[i] = acc * norm
    return out


_want_numba = os.environ.get("WSNLOC_NUMBA", "1") != "0"
BACKEND = "numpy"
_mixture_density_impl = _mixture_density_numpy

if _want_numba:
    try:
        import numba

        _mixture_density_impl = numba.njit(cache=True, nogil=True)(_mixture_density_loop)
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - exercised only without numba
        pass


def mixture_density(points: np.ndarray, comps: np.ndarray, weights: np.ndarray,
                    cov: np.ndarray) -> np.ndarray:
    """Density of the Gaussian mixture sum_j w_j N(comps_j, cov) at each point.

    ``points`` is (P, 2), ``comps`` is (C, 2), ``weights`` is (C,), ``cov``
    a shared symmetric positive-definite 2x2 kernel covariance.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    comps = np.ascontiguousarray(comps, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    return _mixture_density_impl(points, comps, weights,
                                 float(cov[0, 0]), float(cov[0, 1]), float(cov[1, 1]))


def weighted_mean_cov(samples: np.ndarray, weights: np.ndarray):
    """Weighted mean and covariance of a 2D sample set (weights sum to 1)."""
    mu = weights @ samples
    d = samples - mu
    cov = (d * weights[:, None]).T @ d
    return mu, cov
