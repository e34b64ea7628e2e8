import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fibersim.matcore import (CNOT, PAULI, NotHermitian, ShapeMismatch, eig_hermitian, embed_operator,
                              expm_i, matrix_from_obj, matrix_to_obj, partial_trace, tensor)
from fibersim.sampling import ginibre, random_density, random_hermitian
from fibersim.states import bell_state, ket

I2, X, Z = PAULI["I"], PAULI["X"], PAULI["Z"]


def test_tensor_examples():
    assert np.array_equal(tensor(I2, I2), np.eye(4))
    assert np.array_equal(tensor(X, I2) @ ket("00"), ket("10"))
    assert tensor(np.ones((2, 2)), np.ones((3, 3))).shape == (6, 6)


def test_partial_trace_examples(rng):
    ra, rb = random_density(2, rng).matrix, random_density(3, rng).matrix
    assert np.allclose(partial_trace(np.kron(ra, 2 * rb), (2, 3), [0]), 2 * ra, atol=1e-13)
    assert np.allclose(partial_trace(bell_state("phi+").matrix, (2, 2), [0]), I2 / 2, atol=1e-15)
    M = ginibre(rng, 6)
    assert np.array_equal(partial_trace(M, (2, 3), [0, 1]), M)


def test_eig_examples():
    w, _ = eig_hermitian(Z)
    assert np.array_equal(w, [-1, 1])
    w, V = eig_hermitian(X)
    # characteristic polynomial l^2 - 1: eigenvalues -1, 1 with (|0> -/+ |1>)/sqrt2
    assert np.allclose(w, [-1, 1], atol=1e-15)
    s = 1 / np.sqrt(2)
    assert np.allclose(V[:, 0], [s, -s], atol=1e-15) and np.allclose(V[:, 1], [s, s], atol=1e-15)
    assert np.array_equal(eig_hermitian(np.eye(3))[0], [1, 1, 1])


def test_eig_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        eig_hermitian(np.array([[0, 1], [0, 0]]))


def test_expm_examples():
    assert np.allclose(expm_i(X, 0.0), I2, atol=1e-15)
    # e^{-i theta X} = cos(theta) I - i sin(theta) X
    assert np.allclose(expm_i(X, np.pi / 2), -1j * X, atol=1e-15)
    c, s = 0.955336489125606019642310227568, 0.295520206661339575105320745685  # mpmath, theta = 0.3
    assert np.allclose(expm_i(X, 0.3), c * I2 - 1j * s * X, atol=1e-15)


def test_embed_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        embed_operator(CNOT, (2, 2, 2), [0])


def test_matrix_obj_round_trip(rng):
    M = ginibre(rng, 3)
    assert np.array_equal(matrix_from_obj(matrix_to_obj(M)), M)
    with pytest.raises(ValueError):
        matrix_from_obj({"rows": 2, "cols": 2, "entries": [[1, 0]]})


@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 10_000))
def test_partial_trace_trace_preserving_and_linear(da, db, seed):
    r = np.random.default_rng(seed)
    A, B = ginibre(r, da * db), ginibre(r, da * db)
    c = complex(r.normal(), r.normal())
    for keep in ([0], [1]):
        pa = partial_trace(A, (da, db), keep)
        assert abs(np.trace(pa) - np.trace(A)) <= 1e-12 * max(1, np.abs(A).sum())
        lin = partial_trace(A + c * B, (da, db), keep) - pa - c * partial_trace(B, (da, db), keep)
        assert np.max(np.abs(lin)) <= 1e-12 * (1 + abs(c)) * max(1, np.abs(A).sum() + np.abs(B).sum())


@given(st.integers(0, 10_000))
def test_tensor_associative(seed):
    r = np.random.default_rng(seed)
    # small Gaussian integers keep every product exact, so the index bookkeeping is compared exactly
    A, B, C = (r.integers(-9, 10, (n, n)) + 1j * r.integers(-9, 10, (n, n)) for n in (2, 3, 2))
    assert np.array_equal(tensor(tensor(A, B), C), tensor(A, tensor(B, C)))
    A, B, C = ginibre(r, 2), ginibre(r, 3), ginibre(r, 2)
    L, R = tensor(tensor(A, B), C), tensor(A, tensor(B, C))
    assert np.max(np.abs(L - R)) <= 4 * np.finfo(float).eps * np.max(np.abs(L))


@given(st.integers(1, 6), st.floats(-10, 10), st.floats(-10, 10), st.integers(0, 10_000))
def test_expm_group_law(d, s, t, seed):
    H = random_hermitian(d, np.random.default_rng(seed))
    H = 10 * H / max(np.linalg.norm(H, 2), 1e-12)
    assert np.max(np.abs(expm_i(H, s) @ expm_i(H, t) - expm_i(H, s + t))) <= 1e-9


@given(st.integers(1, 64), st.integers(0, 10_000))
def test_eig_reconstruction(d, seed):
    H = random_hermitian(d, np.random.default_rng(seed))
    w, V = eig_hermitian(H)
    res = np.max(np.abs((V * w) @ V.conj().T - H))
    assert res <= 1e-10 * max(np.linalg.norm(H, 2), 1.0)
