"""Dense complex linear algebra for Hermitian operators.

Everything here works on plain numpy arrays.  Hermitian inputs are
symmetrized on the way in so that downstream programs see exactly
Hermitian data.
"""
from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

HERMITICITY_WARN = 1e-12


def as_hermitian(op, *, warn_tol: float = HERMITICITY_WARN) -> np.ndarray:
    """Return ``(op + op^dagger) / 2`` as a complex array.

    Raises ``ValueError`` for non-square or non-finite input.  A deviation
    from hermiticity larger than ``warn_tol`` is logged, not rejected.
    """
    a = np.asarray(op, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    dev = np.max(np.abs(a - a.conj().T), initial=0.0)
    if dev > warn_tol:
        log.warning("symmetrizing operator with hermiticity deviation %.3e", dev)
    return 0.5 * (a + a.conj().T)


def eigvalsh(op) -> np.ndarray:
    return np.linalg.eigvalsh(as_hermitian(op))


def spectral_norm(op) -> float:
    """Largest absolute eigenvalue of a Hermitian operator."""
    w = eigvalsh(op)
    return float(np.max(np.abs(w), initial=0.0))


def trace_norm(op) -> float:
    """Sum of absolute eigenvalues of a Hermitian operator."""
    return float(np.sum(np.abs(eigvalsh(op))))


def partial_trace_first(op, dim_first: int) -> np.ndarray:
    """Trace out the first tensor factor of an operator on C^n1 (x) C^n2."""
    a = np.asarray(op)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if dim_first <= 0 or n % dim_first:
        raise ValueError(f"dimension {n} is not divisible by {dim_first}")
    d2 = n // dim_first
    return np.einsum("iaib->ab", a.reshape(dim_first, d2, dim_first, d2))


def partial_trace_second(op, dim_second: int) -> np.ndarray:
    a = np.asarray(op)
    n = a.shape[0]
    if dim_second <= 0 or n % dim_second:
        raise ValueError(f"dimension {n} is not divisible by {dim_second}")
    d1 = n // dim_second
    return np.einsum("aibi->ab", a.reshape(d1, dim_second, d1, dim_second))


def kron(*ops: np.ndarray) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def real_embed(op) -> np.ndarray:
    """Map ``H = R + iS`` to the real matrix ``[[R, -S], [S, R]]``."""
    a = np.asarray(op, dtype=complex)
    r, s = a.real, a.imag
    return np.block([[r, -s], [s, r]])


def real_unembed(mat) -> np.ndarray:
    """Inverse of :func:`real_embed`, averaging the redundant blocks.

    Applied to an arbitrary real symmetric matrix this is the orthogonal
    projection onto the embedded Hermitian subspace.
    """
    m = np.asarray(mat, dtype=float)
    n = m.shape[0] // 2
    r = 0.5 * (m[:n, :n] + m[n:, n:])
    s = 0.5 * (m[n:, :n] - m[:n, n:])
    return r + 1j * s


def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal basis (Hilbert-Schmidt) of the d x d Hermitian matrices.

    Returns an array of shape ``(d*d, d, d)``: diagonal units first, then
    symmetric and antisymmetric off-diagonal pairs scaled by 1/sqrt(2).
    """
    basis = np.zeros((d * d, d, d), dtype=complex)
    k = 0
    for i in range(d):
        basis[k, i, i] = 1.0
        k += 1
    c = 1.0 / np.sqrt(2.0)
    for i in range(d):
        for j in range(i + 1, d):
            basis[k, i, j] = basis[k, j, i] = c
            k += 1
            basis[k, i, j] = -1j * c
            basis[k, j, i] = 1j * c
            k += 1
    return basis


def herm_coords(op, basis: np.ndarray | None = None) -> np.ndarray:
    """Real coordinates of a Hermitian operator in :func:`hermitian_basis`."""
    a = np.asarray(op, dtype=complex)
    if basis is None:
        basis = hermitian_basis(a.shape[0])
    return np.real(np.einsum("kij,ji->k", basis, a))


def herm_from_coords(x, d: int, basis: np.ndarray | None = None) -> np.ndarray:
    if basis is None:
        basis = hermitian_basis(d)
    return np.tensordot(np.asarray(x, dtype=float), basis, axes=1)


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (g + g.conj().T)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase correction."""
    g = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def ket(vec: Sequence[complex]) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return v / np.linalg.norm(v)


def proj(vec: Sequence[complex]) -> np.ndarray:
    v = ket(vec)
    return np.outer(v, v.conj())


def psd_sqrt(op) -> np.ndarray:
    w, v = np.linalg.eigh(as_hermitian(op))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T
