import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fibersim.channels import (EmbedIsometry, KrausChannel, amplitude_damping, block, blocks, check_channel,
                               choi, dephasing, identity_channel, partial_trace_channel, povm_from_kraus,
                               random_channel, reassemble, tensor_channel, transpose_map)
from fibersim.matcore import PAULI
from fibersim.sampling import ginibre, random_density
from fibersim.states import CompletenessViolated, PLUS, ket, pure

P0, P1 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])


def test_kraus_examples(rng):
    rho = random_density(2, rng)
    assert np.allclose(identity_channel(2).apply(rho).matrix, rho.matrix, atol=0)
    assert np.array_equal(KrausChannel([PAULI["X"]])(P0), P1)
    assert np.allclose(dephasing()(pure(PLUS).matrix), np.eye(2) / 2, atol=1e-15)
    with pytest.raises(CompletenessViolated):
        KrausChannel([np.eye(2), np.eye(2)])


def test_povm_examples():
    E = povm_from_kraus([[P0], [P1]]).effects
    assert np.array_equal(E[0], P0) and np.array_equal(E[1], P1)
    E = povm_from_kraus([[np.eye(2)]]).effects
    assert np.array_equal(E[0], np.eye(2))
    E = povm_from_kraus([[K] for K in amplitude_damping(0.5).kraus]).effects
    assert np.allclose(E[0], np.diag([1, 0.5]), atol=1e-15) and np.allclose(E[1], np.diag([0, 0.5]), atol=1e-15)


def test_choi_examples():
    J = choi(identity_channel(2))
    omega = np.array([1, 0, 0, 1])
    assert np.allclose(J, np.outer(omega, omega), atol=0)
    assert np.linalg.matrix_rank(J) == 1 and check_channel(identity_channel(2)).cptp
    rep = check_channel(transpose_map(2))
    # Choi of the transpose is SWAP, eigenvalues +-1
    assert not rep.completely_positive and abs(rep.choi_min_eig + 1) <= 1e-15
    J = choi(dephasing())
    assert np.allclose(J, np.diag([1, 0, 0, 1]), atol=0) and check_channel(dephasing()).cptp


def test_embedding_and_blocks(rng):
    K = EmbedIsometry((2, 2), 1, [1, 0])
    assert np.array_equal(K(ket("0")), ket("00"))
    for i in range(2):
        for j in range(2):
            assert np.array_equal(block(np.eye(4), (2, 2), i, j), np.eye(2) * (i == j))
    a = ginibre(rng, 4)
    assert np.allclose(reassemble(blocks(a, (2, 2)), (2, 2)), a, atol=0)


def test_partial_trace_channel(rng):
    rho = random_density(4, rng)
    C = partial_trace_channel((2, 2), [0])
    from fibersim.matcore import partial_trace
    assert np.allclose(C(rho.matrix), partial_trace(rho.matrix, (2, 2), [0]), atol=1e-15)


@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 4), st.integers(0, 10_000))
def test_random_channels_are_cptp(din, dout, n, seed):
    r = np.random.default_rng(seed)
    n = max(n, -(-din // dout))
    C = random_channel(din, dout, n, r)
    rep = check_channel(C, 1e-9)
    assert rep.cptp
    E = povm_from_kraus([[K] for K in C.kraus])
    assert np.max(np.abs(sum(E.effects.values()) - np.eye(din))) <= 1e-8
    rho = random_density(din, r)
    for p in E.probabilities(rho).values():
        assert -1e-9 <= p <= 1 + 1e-9


@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 10_000))
def test_product_channels_have_psd_choi(d1, d2, seed):
    r = np.random.default_rng(seed)
    C = tensor_channel(random_channel(d1, d1, 2, r), random_channel(d2, d2, 2, r))
    assert check_channel(C, 1e-9).cptp
