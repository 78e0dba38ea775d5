import numpy as np
import pytest

from tabattr import _kernels, linalg


def _residuals(M, eig):
    recon = eig.eigenvectors @ np.diag(eig.eigenvalues) @ eig.eigenvectors.T
    ortho = eig.eigenvectors.T @ eig.eigenvectors - np.eye(M.shape[0])
    return np.max(np.abs(recon - M)), np.max(np.abs(ortho))


def test_identity_matrix():
    eig = linalg.symmetric_eig(np.eye(5))
    assert np.allclose(eig.eigenvalues, 1.0, atol=1e-12)
    _, ortho = _residuals(np.eye(5), eig)
    assert ortho < 1e-9


def test_diagonal_matrix_sorted_axis_aligned():
    eig = linalg.symmetric_eig(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(eig.eigenvalues, [3.0, 2.0, 1.0], atol=1e-12)
    # sign convention makes the columns exactly canonical basis vectors
    expected = np.array([[1, 0, 0], [0, 0, 1], [0, 1, 0]], dtype=float)
    assert np.allclose(eig.eigenvectors, expected, atol=1e-12)


def test_random_psd_reconstruction(rng):
    A = rng.standard_normal((20, 20))
    M = A @ A.T
    eig = linalg.symmetric_eig(M)
    recon, ortho = _residuals(M, eig)
    assert recon < 1e-8 * max(1.0, np.max(np.abs(M)))
    assert ortho < 1e-9
    assert np.all(eig.eigenvalues >= -1e-10)
    assert np.all(np.diff(eig.eigenvalues) <= 1e-12)


def test_against_lapack_oracle(rng):
    # independent oracle: LAPACK via numpy
    A = rng.standard_normal((30, 30))
    M = (A + A.T) / 2
    eig = linalg.symmetric_eig(M)
    oracle = np.sort(np.linalg.eigvalsh(M))[::-1]
    assert np.allclose(eig.eigenvalues, oracle, atol=1e-8)


def test_non_square_rejected():
    with pytest.raises(linalg.NotSymmetricError):
        linalg.symmetric_eig(np.zeros((3, 4)))


def test_asymmetric_rejected():
    M = np.array([[1.0, 2.0], [0.5, 1.0]])
    with pytest.raises(linalg.NotSymmetricError):
        linalg.symmetric_eig(M)


def test_zero_matrix():
    eig = linalg.symmetric_eig(np.zeros((4, 4)))
    assert np.allclose(eig.eigenvalues, 0.0)


def test_convergence_error(monkeypatch, rng):
    monkeypatch.setattr(linalg, "MAX_SWEEPS", 0)
    A = rng.standard_normal((6, 6))
    with pytest.raises(linalg.ConvergenceError):
        linalg.symmetric_eig(A @ A.T)


def test_truncate_threshold_count():
    eig = linalg.EigenDecomposition(
        eigenvalues=np.array([1.0, 0.5, 0.009]), eigenvectors=np.eye(3))
    factor, k = linalg.truncate_rank(eig, 0.01)
    assert k == 2
    assert factor.shape == (3, 2)


def test_truncate_all_equal():
    eig = linalg.EigenDecomposition(
        eigenvalues=np.ones(6), eigenvectors=np.eye(6))
    _, k = linalg.truncate_rank(eig, 0.01)
    assert k == 6


def test_truncate_strict_inequality_at_threshold():
    eig = linalg.EigenDecomposition(
        eigenvalues=np.array([1.0, 0.01]), eigenvectors=np.eye(2))
    _, k = linalg.truncate_rank(eig, 0.01)
    assert k == 1  # exactly at the threshold is not retained


def test_truncate_negative_never_retained():
    eig = linalg.EigenDecomposition(
        eigenvalues=np.array([2.0, -1.0]), eigenvectors=np.eye(2))
    factor, k = linalg.truncate_rank(eig, 0.01)
    assert k == 1
    assert factor.shape == (2, 1)


def test_truncate_noise_floor():
    # values below 1e-14 of the maximum are numerical zeros even when the
    # relative threshold alone would keep them
    eig = linalg.EigenDecomposition(
        eigenvalues=np.array([1.0, 5e-15]), eigenvectors=np.eye(2))
    _, k = linalg.truncate_rank(eig, 1e-15)
    assert k == 1


def test_truncate_degenerate_spectrum():
    eig = linalg.EigenDecomposition(
        eigenvalues=np.array([0.0, -1.0]), eigenvectors=np.eye(2))
    with pytest.raises(linalg.DegenerateSpectrumError):
        linalg.truncate_rank(eig, 0.01)


def test_factor_reconstructs_truncation(rng):
    A = rng.standard_normal((12, 12))
    M = A @ A.T
    eig = linalg.symmetric_eig(M)
    factor, k = linalg.truncate_rank(eig, 0.05)
    lam, V = eig.eigenvalues[:k], eig.eigenvectors[:, :k]
    assert np.max(np.abs(factor @ factor.T - V @ np.diag(lam) @ V.T)) < 1e-12
    # re-decomposing the truncation recovers the retained eigenvalues
    eig2 = linalg.symmetric_eig(factor @ factor.T)
    assert np.allclose(eig2.eigenvalues[:k], lam, atol=1e-8)


def test_numba_and_numpy_sweeps_bitwise_equal(rng):
    if not _kernels.USING_NUMBA:
        pytest.skip("numba path disabled")
    A0 = rng.standard_normal((15, 15))
    A0 = (A0 + A0.T) / 2
    A1, V1 = A0.copy(), np.eye(15)
    A2, V2 = A0.copy(), np.eye(15)
    _kernels.jacobi_sweep_numpy(A1, V1)
    _kernels.jacobi_sweep_numba(A2, V2)
    assert np.array_equal(A1, A2)
    assert np.array_equal(V1, V2)
