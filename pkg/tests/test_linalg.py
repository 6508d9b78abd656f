import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from distincompat.linalg import (as_hermitian, herm_coords, herm_from_coords, hermitian_basis, kron,
                                 partial_trace_first, partial_trace_second, psd_sqrt, random_density_matrix,
                                 random_hermitian, random_unitary, real_embed, real_unembed,
                                 spectral_norm, trace_norm)


def test_hermitian_basis_orthonormal():
    for d in (1, 2, 3, 4):
        B = hermitian_basis(d)
        gram = np.real(np.einsum("kij,lji->kl", B, B))
        assert B.shape == (d * d, d, d)
        assert np.allclose(gram, np.eye(d * d))
        assert np.allclose(B, B.conj().transpose(0, 2, 1))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_coords_roundtrip(d, seed):
    H = random_hermitian(d, np.random.default_rng(seed))
    assert np.allclose(herm_from_coords(herm_coords(H), d), H)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_real_embedding_preserves_spectrum(d, seed):
    H = random_hermitian(d, np.random.default_rng(seed))
    w = np.linalg.eigvalsh(H)
    we = np.linalg.eigvalsh(real_embed(H))
    assert np.allclose(np.sort(np.repeat(w, 2)), we)
    assert np.allclose(real_unembed(real_embed(H)), H)


def test_partial_traces():
    rng = np.random.default_rng(2)
    A = random_density_matrix(2, rng)
    B = random_density_matrix(3, rng)
    AB = kron(A, B)
    assert np.allclose(partial_trace_first(AB, 2), B)
    assert np.allclose(partial_trace_second(AB, 3), A)
    with pytest.raises(ValueError):
        partial_trace_first(AB, 4)


def test_norms_against_singular_values():
    rng = np.random.default_rng(3)
    H = random_hermitian(4, rng)
    s = np.linalg.svd(H, compute_uv=False)
    assert np.isclose(spectral_norm(H), s.max())
    assert np.isclose(trace_norm(H), s.sum())


def test_as_hermitian_rejects_bad_input():
    with pytest.raises(ValueError):
        as_hermitian(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        as_hermitian(np.array([[np.nan, 0], [0, 1]]))
    M = np.array([[1, 1j], [0, 1]])
    assert np.allclose(as_hermitian(M), as_hermitian(M).conj().T)


def test_random_unitary_and_sqrt():
    rng = np.random.default_rng(4)
    U = random_unitary(3, rng)
    assert np.allclose(U @ U.conj().T, np.eye(3))
    rho = random_density_matrix(3, rng)
    r = psd_sqrt(rho)
    assert np.allclose(r @ r, rho)
