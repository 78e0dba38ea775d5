"""Symmetric eigendecomposition (cyclic Jacobi) and spectral truncation.

The matrices this package decomposes are small dense gradient
second-moment matrices (d <= ~256), for which cyclic Jacobi is simple,
accurate, and fast enough; the rotation sweep is the numba-accelerated
kernel in ``_kernels``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels

MAX_SWEEPS = 100
OFFDIAG_TOL = 1e-12
EIGENVALUE_NOISE_FLOOR = 1e-14


class NotSymmetricError(ValueError):
    """Input matrix is not square or not symmetric within tolerance."""


class ConvergenceError(RuntimeError):
    """Jacobi iteration failed to reach the off-diagonal tolerance."""


class DegenerateSpectrumError(ValueError):
    """The spectrum has no positive mass (e.g. an all-zero gradient field)."""


@dataclass
class EigenDecomposition:
    """Eigenvalues sorted descending; eigenvector j is ``eigenvectors[:, j]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _offdiag_norm(A: np.ndarray) -> float:
    off = A - np.diag(np.diag(A))
    return float(np.sqrt(np.sum(off * off)))


def symmetric_eig(M: np.ndarray) -> EigenDecomposition:
    """Eigendecompose a symmetric matrix by cyclic Jacobi rotations.

    The input is symmetrised as (M + M^T)/2 first; asymmetry beyond
    1e-10 (relative to the largest entry magnitude) is an error. Sweeps
    run until the off-diagonal Frobenius mass drops below 1e-12 times
    the Frobenius norm of M, up to 100 sweeps. Eigenvector columns get
    a deterministic sign: the entry of largest magnitude is positive.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSymmetricError(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M))) if M.size else 0.0)
    asym = float(np.max(np.abs(M - M.T))) if M.size else 0.0
    if asym > 1e-10 * scale:
        raise NotSymmetricError(f"matrix is asymmetric by {asym:.3e}")

    A = np.ascontiguousarray((M + M.T) / 2.0)
    d = A.shape[0]
    V = np.eye(d)
    tol = OFFDIAG_TOL * float(np.sqrt(np.sum(A * A)))
    sweeps = 0
    while _offdiag_norm(A) > tol:
        if sweeps >= MAX_SWEEPS:
            raise ConvergenceError(
                f"off-diagonal mass {_offdiag_norm(A):.3e} above tolerance "
                f"{tol:.3e} after {MAX_SWEEPS} sweeps")
        _kernels.jacobi_sweep(A, V)
        sweeps += 1

    values = np.diag(A).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    V = V[:, order]
    # Deterministic sign: make the largest-magnitude entry of each column positive.
    flip = V[np.argmax(np.abs(V), axis=0), np.arange(d)] < 0
    V[:, flip] *= -1.0
    return EigenDecomposition(eigenvalues=values, eigenvectors=V)


def truncate_rank(eig: EigenDecomposition, rel_threshold: float) -> tuple[np.ndarray, int]:
    """Keep eigenpairs whose eigenvalue strictly exceeds ``rel_threshold``
    times the largest one, and return the d x K factor F = V_K sqrt(L_K).

    F @ F.T reconstructs the rank-K truncation of the original matrix.
    Eigenvalues below 1e-14 of the maximum are treated as numerical
    zeros; negative eigenvalues are never retained.
    """
    if not 0.0 < rel_threshold < 1.0:
        raise ValueError("rel_threshold must lie in (0, 1)")
    values = np.asarray(eig.eigenvalues, dtype=np.float64)
    if np.any(np.diff(values) > 0):
        raise ValueError("eigenvalues must be sorted descending")
    lam_max = values[0] if values.size else 0.0
    if lam_max <= 0.0:
        raise DegenerateSpectrumError("largest eigenvalue is not positive")
    values = values.copy()
    values[values < EIGENVALUE_NOISE_FLOOR * lam_max] = 0.0
    k = int(np.sum(values > rel_threshold * lam_max))
    factor = eig.eigenvectors[:, :k] * np.sqrt(values[:k])
    return factor, k
