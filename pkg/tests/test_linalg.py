"""SVD backends and matrix norms."""

import math

import numpy as np
import pytest
from scipy.linalg import subspace_angles

from dmptest import (
    DomainError,
    frobenius_norm,
    svd_truncated,
    two_to_infinity_norm,
)


def planted_spectrum_matrix(m, n, spectrum, seed=0):
    """Matrix with prescribed singular values and random singular vectors."""
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.standard_normal((m, len(spectrum))))
    V, _ = np.linalg.qr(rng.standard_normal((n, len(spectrum))))
    return (U * np.asarray(spectrum)) @ V.T


class TestSvdTruncated:
    def test_constant_rank_one_matrix(self):
        # Hand SVD of c*J for c=0.25, 2x2: sigma_1 = 2c = 0.5, u = (1,1)/sqrt(2)
        M = np.full((2, 2), 0.25)
        result = svd_truncated(M, 1, backend="dense")
        assert result.S[0] == pytest.approx(0.5, abs=1e-12)
        np.testing.assert_allclose(result.U[:, 0], [1 / math.sqrt(2)] * 2, atol=1e-12)
        residual = M - result.U * result.S @ result.V.T
        assert np.abs(residual).max() < 1e-12

    def test_identity_singular_values(self):
        result = svd_truncated(np.eye(3), 3, backend="dense")
        np.testing.assert_allclose(result.S, [1.0, 1.0, 1.0], atol=1e-12)

    def test_randomized_matches_dense_on_gapped_matrix(self):
        # Top-5 subspace of a matrix with a clear spectral gap below rank 5.
        spectrum = [10.0, 9.0, 8.0, 7.0, 6.0, 0.05, 0.02, 0.01]
        M = planted_spectrum_matrix(40, 60, spectrum, seed=1)
        dense = svd_truncated(M, 5, backend="dense")
        randomized = svd_truncated(M, 5, backend="randomized")
        assert subspace_angles(dense.U, randomized.U).max() < 1e-6
        assert subspace_angles(dense.V, randomized.V).max() < 1e-6
        np.testing.assert_allclose(randomized.S, dense.S, rtol=1e-9)

    def test_randomized_reconstruction_contract(self):
        # Gap ratio 1.05 at the truncation point with a decaying tail: the
        # randomized product must match the best rank-d approximation.
        spectrum = [3.0, 2.0, 1.05, 1.0, 0.5, 0.25, 0.12, 0.06, 0.03]
        M = planted_spectrum_matrix(50, 30, spectrum, seed=2)
        d = 3
        dense = svd_truncated(M, d, backend="dense")
        randomized = svd_truncated(M, d, backend="randomized")
        best = dense.U * dense.S @ dense.V.T
        approx = randomized.U * randomized.S @ randomized.V.T
        assert frobenius_norm(approx - best) <= 1e-6 * frobenius_norm(M)

    def test_orthonormal_columns(self):
        M = np.random.default_rng(3).random((12, 7))
        for backend in ("dense", "randomized"):
            r = svd_truncated(M, 4, backend=backend)
            np.testing.assert_allclose(r.U.T @ r.U, np.eye(4), atol=1e-10)
            np.testing.assert_allclose(r.V.T @ r.V, np.eye(4), atol=1e-10)

    def test_exact_rank_reconstruction(self):
        M = planted_spectrum_matrix(9, 6, [4.0, 2.0, 1.0], seed=4)
        r = svd_truncated(M, 3, backend="dense")
        assert frobenius_norm(r.U * r.S @ r.V.T - M) < 1e-8

    def test_sign_convention_largest_entry_positive(self):
        M = planted_spectrum_matrix(8, 5, [3.0, 1.0], seed=5)
        for backend in ("dense", "randomized"):
            r = svd_truncated(M, 2, backend=backend)
            for j in range(2):
                anchor = np.abs(r.U[:, j]).argmax()
                assert r.U[anchor, j] > 0

    def test_deterministic_repeat_calls(self):
        M = np.random.default_rng(6).random((30, 20))
        for backend in ("randomized", "iterative"):
            a = svd_truncated(M, 4, backend=backend)
            b = svd_truncated(M, 4, backend=backend)
            assert np.array_equal(a.U, b.U)
            assert np.array_equal(a.S, b.S)
            assert np.array_equal(a.V, b.V)

    def test_iterative_matches_dense(self):
        M = np.random.default_rng(12).random((40, 25))
        dense = svd_truncated(M, 3, backend="dense")
        iterative = svd_truncated(M, 3, backend="iterative")
        np.testing.assert_allclose(iterative.S, dense.S, rtol=1e-10)
        np.testing.assert_allclose(iterative.U, dense.U, atol=1e-8)
        np.testing.assert_allclose(iterative.V, dense.V, atol=1e-8)

    def test_iterative_full_rank_fallback(self):
        M = np.random.default_rng(13).random((6, 4))
        dense = svd_truncated(M, 4, backend="dense")
        iterative = svd_truncated(M, 4, backend="iterative")
        np.testing.assert_allclose(iterative.S, dense.S, rtol=1e-12)

    def test_sparse_input(self):
        from scipy import sparse

        M = planted_spectrum_matrix(20, 15, [5.0, 1.0], seed=7)
        M[np.abs(M) < 0.05] = 0.0
        sp = sparse.csr_array(M)
        dense_r = svd_truncated(M, 2, backend="dense")
        sparse_r = svd_truncated(sp, 2, backend="randomized")
        np.testing.assert_allclose(sparse_r.S, dense_r.S, rtol=1e-8)

    def test_d_out_of_range(self):
        M = np.ones((3, 4))
        with pytest.raises(DomainError, match="outside"):
            svd_truncated(M, 0)
        with pytest.raises(DomainError, match="outside"):
            svd_truncated(M, 4)

    def test_non_finite_rejected(self):
        M = np.ones((3, 3))
        M[0, 0] = np.nan
        with pytest.raises(DomainError, match="non-finite"):
            svd_truncated(M, 1)


class TestNorms:
    def test_two_to_infinity_zero_matrix(self):
        assert two_to_infinity_norm(np.zeros((4, 3))) == 0.0

    def test_two_to_infinity_triangle_rows(self):
        assert two_to_infinity_norm(np.array([[3.0, 4.0], [0.0, 1.0]])) == 5.0

    def test_two_to_infinity_matches_row_oracle(self):
        M = np.random.default_rng(8).standard_normal((10, 3))
        oracle = max(math.sqrt(sum(x * x for x in row)) for row in M)
        assert two_to_infinity_norm(M) == pytest.approx(oracle, rel=1e-15)

    def test_frobenius_identity_sqrt2(self):
        assert frobenius_norm(np.eye(2)) == pytest.approx(math.sqrt(2), rel=1e-15)

    def test_frobenius_one_two_two_is_three(self):
        assert frobenius_norm(np.array([[1.0, 2.0], [2.0, 0.0]])) == pytest.approx(3.0)

    def test_frobenius_equals_singular_value_energy(self):
        M = np.random.default_rng(9).random((7, 5))
        s = svd_truncated(M, 5, backend="dense").S
        assert frobenius_norm(M) == pytest.approx(math.sqrt((s**2).sum()), abs=1e-10)

    def test_frobenius_orthogonal_invariance(self):
        rng = np.random.default_rng(10)
        M = rng.standard_normal((6, 4))
        W, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        assert abs(frobenius_norm(M @ W) - frobenius_norm(M)) < 1e-10

    def test_norm_sandwich_inequality(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            M = rng.standard_normal((8, 3))
            fro = frobenius_norm(M)
            tti = two_to_infinity_norm(M)
            assert tti <= fro + 1e-12
            assert fro <= math.sqrt(M.shape[0]) * tti + 1e-12

    def test_non_finite_rejected(self):
        with pytest.raises(DomainError):
            frobenius_norm(np.array([[np.inf]]))
        with pytest.raises(DomainError):
            two_to_infinity_norm(np.array([[np.nan, 1.0]]))
