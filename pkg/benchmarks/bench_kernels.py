"""Compare the numba-jitted kernels against their pure-numpy fallbacks.

Run:  python benchmarks/bench_kernels.py

Both paths apply identical arithmetic in identical order, so outputs
must agree bitwise; this script checks that and reports wall times for
representative problem sizes (the benchmark feature counts 20 and 104,
plus a larger 256).
"""

from __future__ import annotations

import time

import numpy as np

from tabattr import _kernels


def _time(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_jacobi():
    print("cyclic Jacobi sweep (one full sweep, in place)")
    print(f"{'d':>5} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>9}  bitwise")
    rng = np.random.default_rng(0)
    for d in (20, 104, 256):
        A0 = rng.standard_normal((d, d))
        A0 = (A0 + A0.T) / 2.0

        def run(sweep):
            A = A0.copy()
            V = np.eye(d)
            sweep(A, V)
            return A, V

        t_np = _time(lambda: run(_kernels.jacobi_sweep_numpy))
        if _kernels.USING_NUMBA:
            run(_kernels.jacobi_sweep_numba)  # compile before timing
            t_nb = _time(lambda: run(_kernels.jacobi_sweep_numba))
            a_np, v_np = run(_kernels.jacobi_sweep_numpy)
            a_nb, v_nb = run(_kernels.jacobi_sweep_numba)
            same = np.array_equal(a_np, a_nb) and np.array_equal(v_np, v_nb)
            print(f"{d:>5} {t_np*1e3:>12.3f} {t_nb*1e3:>12.3f} "
                  f"{t_np/t_nb:>8.1f}x  {same}")
        else:
            print(f"{d:>5} {t_np*1e3:>12.3f} {'n/a':>12} {'n/a':>9}")


def bench_ranks():
    print("\ntie-averaged ranks (2000 rows)")
    print(f"{'d':>5} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>9}  bitwise")
    rng = np.random.default_rng(1)
    for d in (20, 104):
        X = np.round(rng.standard_normal((2000, d)), 1)  # rounding forces ties
        t_np = _time(_kernels.average_ranks_numpy, X)
        if _kernels.USING_NUMBA:
            _kernels.average_ranks_numba(X)
            t_nb = _time(_kernels.average_ranks_numba, X)
            same = np.array_equal(_kernels.average_ranks_numpy(X),
                                  _kernels.average_ranks_numba(X))
            print(f"{d:>5} {t_np*1e3:>12.3f} {t_nb*1e3:>12.3f} "
                  f"{t_np/t_nb:>8.1f}x  {same}")
        else:
            print(f"{d:>5} {t_np*1e3:>12.3f} {'n/a':>12} {'n/a':>9}")


def bench_full_eig():
    print("\nfull eigendecomposition via tabattr.linalg.symmetric_eig")
    from tabattr.linalg import symmetric_eig
    rng = np.random.default_rng(2)
    for d in (20, 104):
        A = rng.standard_normal((d, d))
        M = A @ A.T / d
        t = _time(symmetric_eig, M, repeats=2)
        eig = symmetric_eig(M)
        resid = float(np.max(np.abs(
            eig.eigenvectors @ np.diag(eig.eigenvalues) @ eig.eigenvectors.T - M)))
        print(f"  d={d:<4} {t*1e3:10.2f} ms   reconstruction residual {resid:.2e}")


if __name__ == "__main__":
    print(f"numba path active: {_kernels.USING_NUMBA} "
          "(set TABATTR_DISABLE_NUMBA=1 for the numpy path)\n")
    bench_jacobi()
    bench_ranks()
    bench_full_eig()
