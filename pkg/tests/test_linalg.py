import numpy as np
import pytest

from blindtomo import linalg


def random_hermitian(d, rng):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (a + a.conj().T)


def test_eig_hermitian_descending_and_reconstructs():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = random_hermitian(6, rng)
        vals, vecs = linalg.eig_hermitian(a)
        assert np.all(np.diff(vals) <= 1e-12)
        assert np.allclose((vecs * vals) @ vecs.conj().T, a, atol=1e-10)
        assert np.allclose(vecs.conj().T @ vecs, np.eye(6), atol=1e-10)


def test_eig_hermitian_symmetrizes_input():
    a = np.array([[1.0, 2.0], [0.0, -1.0]], dtype=complex)
    vals, _ = linalg.eig_hermitian(a)
    ref, _ = linalg.eig_hermitian(0.5 * (a + a.conj().T))
    assert np.allclose(vals, ref)


def test_eig_hermitian_rejects_non_square():
    with pytest.raises(linalg.DimensionError):
        linalg.eig_hermitian(np.zeros((2, 3)))


def test_frobenius_inner_conjugate_linear():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    assert np.isclose(linalg.frobenius_inner(a, b), np.trace(a.conj().T @ b))
    assert np.isclose(linalg.frobenius_inner(1j * a, b),
                      -1j * linalg.frobenius_inner(a, b))
    with pytest.raises(linalg.DimensionError):
        linalg.frobenius_inner(a, np.zeros((2, 2)))


def test_frobenius_norm_matches_inner():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    assert np.isclose(linalg.frobenius_norm(a) ** 2,
                      linalg.frobenius_inner(a, a).real)


def test_pauli_single_letters():
    assert np.allclose(linalg.pauli_matrix("I"), np.eye(2))
    assert np.allclose(linalg.pauli_matrix("Z"), np.diag([1, -1]))
    y = np.array([[0, -1j], [1j, 0]])
    assert np.allclose(linalg.pauli_matrix("Y"), y)


def test_pauli_matrix_multi_qubit():
    zx = linalg.pauli_matrix("ZX")
    assert zx.shape == (4, 4)
    assert np.allclose(zx, linalg.kron(linalg.PAULI["Z"], linalg.PAULI["X"]))
    # Pauli strings are Hermitian involutions with Hilbert-Schmidt norm sqrt(d)
    assert np.allclose(zx @ zx, np.eye(4))
    assert np.allclose(zx, zx.conj().T)
    assert np.isclose(np.trace(zx), 0.0)
    assert np.isclose(linalg.frobenius_norm(zx) ** 2, 4)


def test_pauli_matrix_rejects_empty():
    with pytest.raises(linalg.DimensionError):
        linalg.pauli_matrix("")
