"""Cyclic Jacobi eigensolver kernels.

Two implementations of the same sweep: a numba-jitted scalar loop (hot path)
and a vectorized numpy fallback.  Both apply identical per-element arithmetic
so results agree bit-for-bit; set MSLKIT_DISABLE_NUMBA=1 to force the numpy
path (it is also used automatically when numba is unavailable).
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag instead
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


def numba_disabled() -> bool:
    return os.environ.get("MSLKIT_DISABLE_NUMBA", "").strip().lower() in (
        "1",
        "true",
        "yes",
    )


def backend_name() -> str:
    """Name of the kernel backend the next call will use."""
    return "numpy" if (numba_disabled() or not HAS_NUMBA) else "numba"


@njit(cache=True)
def _jacobi_sweeps_numba(a, v, threshold, max_sweeps):  # pragma: no cover
    n = a.shape[0]
    sweeps = 0
    off = 0.0
    for sweep in range(max_sweeps + 1):
        off2 = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                off2 += 2.0 * a[i, j] * a[i, j]
        off = math.sqrt(off2)
        sweeps = sweep
        if off <= threshold or sweep == max_sweeps:
            return sweeps, off
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for i in range(n):
                    if i != p and i != q:
                        aip = a[i, p]
                        aiq = a[i, q]
                        a[i, p] = c * aip - s * aiq
                        a[p, i] = a[i, p]
                        a[i, q] = c * aiq + s * aip
                        a[q, i] = a[i, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for i in range(n):
                    vip = v[i, p]
                    viq = v[i, q]
                    v[i, p] = c * vip - s * viq
                    v[i, q] = c * viq + s * vip
    return sweeps, off


def _jacobi_sweeps_numpy(a, v, threshold, max_sweeps):
    n = a.shape[0]
    sweeps = 0
    off = 0.0
    for sweep in range(max_sweeps + 1):
        off2 = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                off2 += 2.0 * a[i, j] * a[i, j]
        off = math.sqrt(off2)
        sweeps = sweep
        if off <= threshold or sweep == max_sweeps:
            return sweeps, off
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                colp = a[:, p].copy()
                colq = a[:, q].copy()
                newp = c * colp - s * colq
                newq = c * colq + s * colp
                newp[p] = app - t * apq
                newp[q] = 0.0
                newq[q] = aqq + t * apq
                newq[p] = 0.0
                a[:, p] = newp
                a[p, :] = newp
                a[:, q] = newq
                a[q, :] = newq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = c * vq + s * vp
    return sweeps, off


def jacobi_eigh(a: np.ndarray, threshold: float, max_sweeps: int):
    """Diagonalize symmetric `a` in place by cyclic Jacobi rotations.

    Returns (values, vectors, sweeps, off) where `values` are the unsorted
    diagonal entries after the final sweep, `vectors` the accumulated
    rotations (columns), `sweeps` the number of full sweeps applied, and
    `off` the Frobenius norm of the remaining off-diagonal part.
    """
    work = np.array(a, dtype=np.float64, order="C", copy=True)
    n = work.shape[0]
    vecs = np.eye(n, dtype=np.float64)
    if numba_disabled() or not HAS_NUMBA:
        sweeps, off = _jacobi_sweeps_numpy(work, vecs, threshold, max_sweeps)
    else:
        sweeps, off = _jacobi_sweeps_numba(work, vecs, threshold, max_sweeps)
    return np.diagonal(work).copy(), vecs, sweeps, off
