import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fibersim.algebra import GateOutsideCheckA, full_algebra, generate_algebra, scalars
from fibersim.channels import KrausChannel, identity_channel, partial_trace_channel, random_channel
from fibersim.fibration import (EMPTY_FIBER, CausalNet, IsotonyViolation, QuantumNetwork, assemble,
                                causality_check, example_three_qubits, revalidate, trotter_evolve)
from fibersim.matcore import PAULI, ShapeMismatch, expm_i
from fibersim.sampling import random_density
from fibersim.states import bell_state, pure
from fibersim.topology import discrete, validate

X, Z = PAULI["X"], PAULI["Z"]
P0 = np.diag([1.0, 0.0]).astype(complex)


def _full_algebras(T):
    return {T.labels(m): full_algebra(2 ** len(T.labels(m))) for m in T.opens if m}


def test_example_three_qubits_assembles():
    F = example_three_qubits()
    assert len(F.topology.opens) == 8 and F.metadata["violations"] == []
    assert [F.algebra(U).size for U in ("1", "1,2", "1,2,3")] == [4, 16, 64]


def test_isotony_violation():
    T = discrete("12")
    algs = {("1",): full_algebra(2), ("1", "2"): generate_algebra([np.kron(Z, np.eye(2))], 4)}
    with pytest.raises(IsotonyViolation) as exc:
        assemble(T, algs)
    assert exc.value.U == ("1", "2") and exc.value.V == ("1",)


def test_gate_with_kernel_rejected():
    T = discrete("1")
    with pytest.raises(GateOutsideCheckA) as exc:
        assemble(T, gates={("1",): {"P0": P0}})
    assert np.allclose(np.abs(exc.value.witness), [0, 1])


def test_restrict_examples(rng):
    F = example_three_qubits()
    ra, rb = random_density(2, rng).matrix, random_density(2, rng).matrix
    assert np.allclose(F.restrict(np.kron(ra, rb), "1,2", "1").matrix, ra, atol=1e-15)
    assert np.allclose(F.restrict(bell_state().matrix, "1,2", "1").matrix, np.eye(2) / 2, atol=1e-15)


def test_fiber_examples():
    T = discrete("12")
    rho = pure([1, 0])
    F = assemble(T, inits={("1",): rho, ("2",): rho}, gates={("1",): {"I": np.eye(2)}, ("2",): {"X": X}})
    assert len(F.fiber("1")) == 1 and np.allclose(F.fiber("1")[0].matrix, rho.matrix)
    assert len(F.fiber("2")) == 2
    assert F.fiber("1,2") == EMPTY_FIBER


def test_missing_algebra_is_preimage():
    T = discrete("12")
    F = assemble(T, {("1", "2"): generate_algebra([np.kron(Z, np.eye(2)), np.kron(np.eye(2), X)], 4)})
    # preimage of diag(Z) (x) span(I, X) on point 1 is span(I, Z)
    assert F.algebra("1").size == 2 and F.algebra("1").contains(Z)


def test_causality_examples():
    F = example_three_qubits()
    assert causality_check(CausalNet.declare(F, [])).ok
    rep = causality_check(CausalNet.declare(F, [("1", "2"), ("1,2", "3")]))
    assert rep.ok and rep.worst_value == 0.0
    rep = causality_check(CausalNet.declare(F, [("1,2", "2,3")]))
    assert not rep.ok and rep.worst_pair == (("1", "2"), ("2", "3")) and rep.witness is not None


def test_network_examples(rng):
    F = example_three_qubits()
    net = QuantumNetwork(F, F).connect("1", "2", identity_channel(2))
    rho = random_density(2, rng).matrix
    assert np.allclose(net.transmit(0, rho).matrix, rho, atol=1e-15)
    net = net.connect("1,2", "3", partial_trace_channel((2, 2), [1]))
    state = np.kron(np.diag([1.0, 0]), np.diag([0.0, 1]))
    assert np.allclose(net.transmit(("1,2", "3"), state).matrix, np.diag([0, 1]), atol=1e-15)
    with pytest.raises(ShapeMismatch):
        net.connect("1", "1,2", identity_channel(2))


def test_trotter_examples(rng):
    rho = random_density(2, rng).matrix
    r = trotter_evolve(None, None, [Z, 2 * Z], 1.0, 3, rho=rho)
    assert r.bound == 0 and r.exact_error <= 1e-14
    pieces = [X / 2, Z / 2]
    r1 = trotter_evolve(None, None, pieces, 1.0, 100, rho=rho)
    r2 = trotter_evolve(None, None, pieces, 1.0, 200, rho=rho)
    exact = expm_i((X + Z) / 2, 1.0)
    assert r1.exact_error <= 3e-3 and r1.exact_error <= r1.bound
    assert np.linalg.norm(r1.unitary - exact, 2) == pytest.approx(r1.exact_error)
    assert r1.exact_error / r2.exact_error >= 1.8


SUBSETS = ["1", "2", "3", "1,2", "1,3", "2,3", "1,2,3"]


@settings(max_examples=20)
@given(st.integers(0, 10_000))
def test_isotony_transitive(seed):
    r = np.random.default_rng(seed)
    T = discrete("123")
    algs = {}
    for U in SUBSETS:
        n = len(U.split(","))
        choice = r.integers(3)
        if choice == 0:
            algs[U] = full_algebra(2 ** n)
        elif choice == 1:
            algs[U] = scalars(2 ** n)
        else:
            algs[U] = generate_algebra([np.kron(Z, np.eye(2 ** (n - 1)))], 2 ** n)
    F = assemble(T, {tuple(U.split(",")): A for U, A in algs.items()}, raise_first=False, n_sample_states=0)
    bad = {(v.U, v.V) for v in F.metadata["violations"] if isinstance(v, IsotonyViolation)}
    opens = [tuple(U.split(",")) for U in SUBSETS]
    for W in opens:
        for V in opens:
            for U in opens:
                if set(W) < set(V) < set(U) and (V, W) not in bad and (U, V) not in bad:
                    assert (U, W) not in bad


@given(st.sampled_from(["1,2", "1,2,3", "2,3"]), st.integers(0, 10_000))
def test_restrict_keeps_states(U, seed):
    F = example_three_qubits()
    r = np.random.default_rng(seed)
    rho = random_density(F.dim(U), r).matrix
    for V in SUBSETS:
        if set(V.split(",")) <= set(U.split(",")):
            S = F.restrict(rho, U, V).matrix
            assert abs(np.trace(S) - 1) <= 1e-12 and np.linalg.eigvalsh(S)[0] >= -1e-12


@settings(max_examples=10)
@given(st.integers(0, 10_000))
def test_fiber_monotone_in_gates(seed):
    r = np.random.default_rng(seed)
    T = validate("1", [[], ["1"]])
    rho = random_density(2, r)
    small = assemble(T, inits={("1",): rho}, gates={("1",): {"X": X}})
    big = assemble(T, inits={("1",): rho}, gates={("1",): {"X": X, "Z": Z}})
    fs, fb = small.fiber("1"), big.fiber("1")
    for S in fs:
        assert min(np.abs(S.matrix - B.matrix).max() for B in fb) <= 1e-9


@settings(max_examples=10)
@given(st.integers(0, 10_000))
def test_network_edges_revalidate(seed):
    r = np.random.default_rng(seed)
    F = example_three_qubits()
    net = QuantumNetwork(F, F)
    for U, V in (("1", "2"), ("1,2", "3"), ("3", "2,3")):
        C = random_channel(F.dim(U), F.dim(V), 4, r)
        net = net.connect(U, V, KrausChannel(C.kraus))
    assert all(revalidate(net))
