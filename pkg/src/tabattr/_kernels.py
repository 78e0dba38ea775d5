"""Hot numeric kernels: numba-jitted with a pure-numpy fallback.

The two loop-bound kernels in this package are the cyclic Jacobi
rotation sweep (the eigensolver inner loop) and tie-averaged rank
assignment (the Spearman inner loop). Everything else in the package is
dominated by BLAS matmuls where numba buys nothing.

Path selection: numba is used when importable unless the environment
variable ``TABATTR_DISABLE_NUMBA`` is set to a non-empty value other
than ``0``. Both paths apply identical arithmetic in identical order,
so results are bitwise equal; ``benchmarks/bench_kernels.py`` compares
their speed.
"""

from __future__ import annotations

import math
import os

import numpy as np


def _numba_disabled() -> bool:
    flag = os.environ.get("TABATTR_DISABLE_NUMBA", "")
    return flag not in ("", "0")


def jacobi_sweep_numpy(A: np.ndarray, V: np.ndarray) -> None:
    """One cyclic Jacobi sweep over all p < q pairs, in place.

    ``A`` is the symmetric work matrix being driven to diagonal form,
    ``V`` accumulates the rotations (columns become eigenvectors).
    """
    d = A.shape[0]
    for p in range(d - 1):
        for q in range(p + 1, d):
            apq = A[p, q]
            if apq == 0.0:
                continue
            theta = (A[q, q] - A[p, p]) / (2.0 * apq)
            t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
            if theta < 0.0:
                t = -t
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c
            col_p = A[:, p].copy()
            col_q = A[:, q].copy()
            A[:, p] = c * col_p - s * col_q
            A[:, q] = s * col_p + c * col_q
            row_p = A[p, :].copy()
            row_q = A[q, :].copy()
            A[p, :] = c * row_p - s * row_q
            A[q, :] = s * row_p + c * row_q
            v_p = V[:, p].copy()
            v_q = V[:, q].copy()
            V[:, p] = c * v_p - s * v_q
            V[:, q] = s * v_p + c * v_q


def average_ranks_numpy(X: np.ndarray) -> np.ndarray:
    """Row-wise 1-based ranks with ties assigned their average rank."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    out = np.empty((n, d), dtype=np.float64)
    for r in range(n):
        v = X[r]
        order = np.argsort(v, kind="stable")
        sv = v[order]
        starts = np.flatnonzero(np.r_[True, sv[1:] != sv[:-1]])
        ends = np.r_[starts[1:], d]
        avg = 0.5 * (starts + ends - 1) + 1.0
        out[r, order] = np.repeat(avg, ends - starts)
    return out


if not _numba_disabled():
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        njit = None
else:
    njit = None

USING_NUMBA = njit is not None

if njit is not None:

    @njit(cache=True)
    def jacobi_sweep_numba(A, V):  # pragma: no cover - exercised via dispatch
        d = A.shape[0]
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for i in range(d):
                    aip = A[i, p]
                    aiq = A[i, q]
                    A[i, p] = c * aip - s * aiq
                    A[i, q] = s * aip + c * aiq
                for i in range(d):
                    api = A[p, i]
                    aqi = A[q, i]
                    A[p, i] = c * api - s * aqi
                    A[q, i] = s * api + c * aqi
                for i in range(d):
                    vip = V[i, p]
                    viq = V[i, q]
                    V[i, p] = c * vip - s * viq
                    V[i, q] = s * vip + c * viq

    @njit(cache=True)
    def average_ranks_numba(X):  # pragma: no cover - exercised via dispatch
        n, d = X.shape
        out = np.empty((n, d), dtype=np.float64)
        for r in range(n):
            v = X[r]
            order = np.argsort(v)
            i = 0
            while i < d:
                j = i
                while j + 1 < d and v[order[j + 1]] == v[order[i]]:
                    j += 1
                avg = 0.5 * (i + j) + 1.0
                for k in range(i, j + 1):
                    out[r, order[k]] = avg
                i = j + 1
        return out

    jacobi_sweep = jacobi_sweep_numba
    average_ranks = average_ranks_numba
else:
    jacobi_sweep = jacobi_sweep_numpy
    average_ranks = average_ranks_numpy
