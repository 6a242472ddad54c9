"""Tests for the dense complex linear-algebra service."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from puaclms.core.exceptions import NumericalException, ShapeMismatchException, SingularMatrixException
from puaclms.services.algebra_service import (
    eig_general,
    eig_hermitian,
    kron,
    solve,
    unvec,
    vec,
    weighted_norm_sq,
)
from tests.conftest import random_complex


def random_unitary(rng, n):
    q, _ = np.linalg.qr(random_complex(rng, n, n))
    return q


class TestKronAndVec:
    def test_identity_factor_gives_block_diagonal(self, np_rng):
        a = random_complex(np_rng, 2, 2)
        result = kron(np.eye(2), a)
        assert result.shape == (4, 4)
        assert_array_equal(result[:2, :2], a)
        assert_array_equal(result[2:, 2:], a)
        assert_array_equal(result[:2, 2:], 0)

    def test_scalar_factor(self):
        assert_array_equal(kron(np.array([[2]]), np.eye(2)), [[2, 0], [0, 2]])

    def test_vectorization_identity(self, np_rng):
        a, sigma, b = (random_complex(np_rng, 3, 3) for _ in range(3))
        assert_allclose(vec(a @ sigma @ b), kron(b.T, a) @ vec(sigma), atol=1e-12)

    def test_mixed_product_property(self, np_rng):
        a, b, c, d = (random_complex(np_rng, 2, 2) for _ in range(4))
        assert_allclose(kron(a, b) @ kron(c, d), kron(a @ c, b @ d), atol=1e-12)

    def test_vec_stacks_columns(self):
        assert_array_equal(vec(np.array([[1, 3], [2, 4]])), [1, 2, 3, 4])
        assert_array_equal(vec(np.zeros((3, 2))), np.zeros(6))

    def test_unvec_inverts_vec(self, np_rng):
        a = random_complex(np_rng, 4, 4)
        assert_array_equal(unvec(vec(a), 4), a)

    def test_unvec_rejects_wrong_length(self):
        with pytest.raises(ShapeMismatchException):
            unvec(np.ones(5), 2)

    def test_kron_rejects_vectors(self):
        with pytest.raises(ShapeMismatchException, match="2-D"):
            kron(np.ones(3), np.eye(2))


class TestWeightedNorm:
    def test_identity_weighting(self):
        assert weighted_norm_sq(np.array([1, 1j]), np.eye(2)) == pytest.approx(2.0)

    def test_zero_weighting(self, np_rng):
        assert weighted_norm_sq(random_complex(np_rng, 3), np.zeros((3, 3))) == 0.0

    def test_factorized_weighting(self, np_rng):
        m = random_complex(np_rng, 4, 4)
        x = random_complex(np_rng, 4)
        expected = np.linalg.norm(m @ x) ** 2
        assert weighted_norm_sq(x, m.conj().T @ m) == pytest.approx(expected, rel=1e-12)

    def test_nonnegative_for_psd(self, np_rng):
        for _ in range(1000):
            m = random_complex(np_rng, 3, 3)
            assert weighted_norm_sq(random_complex(np_rng, 3), m.conj().T @ m) >= 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeMismatchException):
            weighted_norm_sq(np.ones(3), np.eye(2))

    def test_non_hermitian_weighting_rejected(self):
        with pytest.raises(NumericalException, match="not real"):
            weighted_norm_sq(np.array([1.0, 1j]), np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestEigHermitian:
    def test_diagonal_sorted_descending(self):
        result = eig_hermitian(np.diag([3.0, 1.0, 2.0]))
        assert_allclose(result.values, [3.0, 2.0, 1.0])

    def test_constructed_spectrum(self, np_rng):
        u = random_unitary(np_rng, 2)
        result = eig_hermitian(u @ np.diag([5.0, 1.0]) @ u.conj().T)
        assert_allclose(result.values, [5.0, 1.0], atol=1e-10)

    def test_two_by_two_known_roots(self):
        result = eig_hermitian(np.array([[2, 1j], [-1j, 2]]))
        assert_allclose(result.values, [3.0, 1.0], atol=1e-12)

    def test_eigenpairs_orthonormal_with_small_residual(self, np_rng):
        m = random_complex(np_rng, 6, 6)
        a = m + m.conj().T
        result = eig_hermitian(a)
        assert_allclose(result.vectors.conj().T @ result.vectors, np.eye(6), atol=1e-12)
        assert result.residual <= 1e-10
        assert result.values.sum() == pytest.approx(np.trace(a).real, abs=1e-10 * np.linalg.norm(a, 2))
        assert np.prod(result.values) == pytest.approx(np.linalg.det(a).real, rel=1e-6)

    def test_rejects_non_hermitian(self):
        with pytest.raises(NumericalException, match="Hermitian"):
            eig_hermitian(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestEigGeneral:
    def test_upper_triangular(self):
        values = eig_general(np.array([[1.0, 5.0, 2.0], [0.0, 3.0, 7.0], [0.0, 0.0, -2.0]])).values
        assert_allclose(sorted(values.real), [-2.0, 1.0, 3.0], atol=1e-12)

    def test_companion_matrix(self):
        values = eig_general(np.array([[3.0, -2.0], [1.0, 0.0]])).values
        assert_allclose(sorted(values.real), [1.0, 2.0], atol=1e-12)
        assert_allclose(values.imag, 0.0, atol=1e-12)

    def test_adjoint_spectrum(self, np_rng):
        a = random_complex(np_rng, 5, 5)
        forward = np.sort_complex(eig_general(a).values)
        adjoint = np.sort_complex(np.conj(eig_general(a.conj().T).values))
        assert_allclose(forward, adjoint, atol=1e-8)

    def test_agrees_with_hermitian_solver(self, np_rng):
        m = random_complex(np_rng, 4, 4)
        a = m + m.conj().T
        general = np.sort(eig_general(a).values.real)[::-1]
        assert_allclose(general, eig_hermitian(a).values, atol=1e-8)

    def test_vectors_on_request(self, np_rng):
        a = random_complex(np_rng, 4, 4)
        result = eig_general(a, compute_vectors=True)
        assert_allclose(a @ result.vectors, result.vectors * result.values, atol=1e-10)


class TestSolve:
    def test_identity(self, np_rng):
        b = random_complex(np_rng, 3)
        assert_allclose(solve(np.eye(3), b), b)

    def test_diagonal(self):
        assert_allclose(solve(np.diag([2.0, 4.0]), np.array([2.0, 8.0])), [1.0, 2.0])

    def test_reconstructs_known_solution(self, np_rng):
        a = random_complex(np_rng, 8, 8) + 8 * np.eye(8)
        x = random_complex(np_rng, 8)
        assert_allclose(solve(a, a @ x), x, atol=1e-10)

    def test_singular_matrix_reports_condition(self):
        with pytest.raises(SingularMatrixException, match="condition estimate") as info:
            solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))
        assert info.value.condition > 1e12 or not np.isfinite(info.value.condition)
