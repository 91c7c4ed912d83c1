"""Dense complex linear-algebra kernel.

Hermitian eigendecomposition (descending spectrum), Hilbert-Schmidt inner
products and norms, and Kronecker products used to expand Pauli strings.
Everything here is a pure function on ndarrays; block dimensions stay small
(d <= 32) so dense full-spectrum routines are the right tool.
"""

from __future__ import annotations

import numpy as np

HERMITICITY_TOL = 1e-12


class DimensionError(ValueError):
    """Shape mismatch between operands."""


PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def eig_hermitian(a):
    """Eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues, eigenvectors) with eigenvalues real and sorted in
    descending order, eigenvector k in column k. The input is symmetrized as
    (a + a^dagger)/2 first to absorb floating-point asymmetry.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    h = 0.5 * (a + a.conj().T)
    vals, vecs = np.linalg.eigh(h)
    # eigh returns ascending order; stable flip keeps tie order deterministic
    order = np.arange(vals.shape[0])[::-1]
    return vals[order], vecs[:, order]


def frobenius_inner(a, b):
    """Hilbert-Schmidt inner product tr(a^dagger b), conjugate-linear in a."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return complex(np.sum(np.conj(a) * b))


def frobenius_norm(a):
    return float(np.linalg.norm(a))


def kron(a, b):
    """Kronecker product a (x) b."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def pauli_matrix(letters: str):
    """Dense matrix of a multi-qubit Pauli string, e.g. 'ZYZZY'."""
    if not letters:
        raise DimensionError("empty Pauli string")
    out = PAULI[letters[0]]
    for ch in letters[1:]:
        out = np.kron(out, PAULI[ch])
    return out
