"""Finite-dimensional matrix *-algebras, commutants and gate orbits.

An algebra is stored as a Hilbert-Schmidt orthonormal basis of its span
(``<A, B> = Tr(A* B)``). Spans are computed with the SVD of the vectorised
matrices; membership is decided by the HS residual of the orthogonal
projection onto the span.

On the ``check-A`` set. The set of ``a`` whose conjugation action maps every
non-zero PSD operator to a non-zero PSD operator is, in finite dimension,
exactly the set of injective ``a``:

    Tr(a rho a*) = Tr(a* a rho) > 0 for all PSD rho != 0
        <=>  a* a is positive definite  <=>  ker a = {0}.

(=> take rho = v v* for v in ker a; <= a* a >= lambda_min I with lambda_min > 0
gives Tr(a* a rho) >= lambda_min Tr(rho) > 0.) :func:`in_check_A` decides
membership through the smallest eigenvalue of ``a* a`` and, when it fails,
returns a kernel vector as witness.
"""
from collections import deque
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.spatial import cKDTree

from .matcore import as_matrix, dagger, max_norm, trace_distance
from .states import TRACE_TOL, VANISHED, DensityOperator, UnnormalizedState, conj_act, density, pure
from .sampling import random_ket, rng_from

SPAN_TOL = 1e-9


class NotStarAlgebra(ValueError):
    pass


class NotInAlgebra(ValueError):
    pass


class GateOutsideCheckA(ValueError):
    def __init__(self, name, certificate):
        super().__init__(f"gate {name!r} is not injective (min eig of a*a = {certificate:.3e})")
        self.name = name
        self.certificate = certificate


def orthonormal_span(mats, d, tol=SPAN_TOL):
    """HS-orthonormal basis (k, d, d) of the span of ``mats``."""
    mats = [np.asarray(m, dtype=np.complex128).reshape(d * d) for m in mats]
    if not mats:
        return np.zeros((0, d, d), dtype=np.complex128)
    A = np.array(mats)
    _, s, Vh = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    # A = (U S) Vh: the leading rows of Vh span the row space and are HS-orthonormal
    return Vh[:rank].reshape(rank, d, d)


def _coefficients(basis, M):
    return np.einsum("kij,ij->k", np.conj(basis), M)


def span_residual(basis, M):
    """Frobenius norm of ``M`` minus its projection onto ``span(basis)``."""
    M = np.asarray(M, dtype=np.complex128)
    if basis.shape[0] == 0:
        return float(np.linalg.norm(M))
    proj = np.einsum("k,kij->ij", _coefficients(basis, M), basis)
    return float(np.linalg.norm(M - proj))


@dataclass(frozen=True, eq=False)
class MatrixStarAlgebra:
    """A *-closed, unital matrix span. Construct via :func:`from_span` or helpers."""

    dim: int
    basis: np.ndarray = field(repr=False)

    @property
    def size(self):
        return self.basis.shape[0]

    def contains(self, M, tol=SPAN_TOL):
        return span_residual(self.basis, M) <= tol * max(1.0, float(np.linalg.norm(M)))

    def includes(self, other, tol=SPAN_TOL):
        """``span(other) <= span(self)``."""
        return all(self.contains(B, tol) for B in other.basis)

    def same_span(self, other, tol=SPAN_TOL):
        return self.size == other.size and self.includes(other, tol) and other.includes(self, tol)

    def __repr__(self):
        return f"MatrixStarAlgebra(dim={self.dim}, size={self.size})"


def _check_star_closed(basis, d, tol):
    for B in basis:
        if span_residual(basis, dagger(B)) > tol:
            raise NotStarAlgebra("span is not closed under the adjoint")
    if span_residual(basis, np.eye(d)) > tol:
        raise NotStarAlgebra("span does not contain the identity")
    for B, C in product(basis, repeat=2):
        if span_residual(basis, B @ C) > tol:
            raise NotStarAlgebra("span is not closed under multiplication")


def from_span(mats, d, tol=SPAN_TOL, check=True):
    """Algebra spanned by ``mats``; raises :class:`NotStarAlgebra` if the span is not one."""
    basis = orthonormal_span(mats, d, tol)
    if check:
        _check_star_closed(basis, d, tol)
    basis.setflags(write=False)
    return MatrixStarAlgebra(d, basis)


def full_algebra(d):
    basis = np.zeros((d * d, d, d), dtype=np.complex128)
    for k in range(d * d):
        basis[k].flat[k] = 1.0
    basis.setflags(write=False)
    return MatrixStarAlgebra(d, basis)


def scalars(d):
    basis = (np.eye(d, dtype=np.complex128) / np.sqrt(d))[None]
    basis.setflags(write=False)
    return MatrixStarAlgebra(d, basis)


def generate_algebra(generators, d, tol=SPAN_TOL, max_rounds=64):
    """Smallest unital *-algebra containing ``generators``.

    Starts from the identity, the generators and their adjoints, then keeps
    adding all pairwise products of basis elements, re-orthonormalising after
    every round until the dimension stops growing.
    """
    gens = [as_matrix(g) for g in generators]
    for g in gens:
        if g.shape != (d, d):
            raise ValueError(f"generator of shape {g.shape} is not {d}x{d}")
    mats = [np.eye(d, dtype=np.complex128)] + gens + [dagger(g) for g in gens]
    basis = orthonormal_span(mats, d, tol)
    for _ in range(max_rounds):
        prods = np.einsum("aij,bjk->abik", basis, basis).reshape(-1, d, d)
        new = orthonormal_span(np.concatenate([basis, prods]), d, tol)
        if new.shape[0] == basis.shape[0]:
            basis = new
            break
        basis = new
    else:  # pragma: no cover - dimension is bounded by d^2
        raise RuntimeError("algebra generation did not stabilise")
    basis.setflags(write=False)
    return MatrixStarAlgebra(d, basis)


def commutant(A, tol=SPAN_TOL):
    """All ``X`` with ``[B, X] = 0`` for every basis element ``B`` of ``A``.

    Row-major vectorisation turns ``B X - X B`` into ``(B (x) I - I (x) B^T) vec X``;
    the commutant is the null space of the stacked system.
    """
    d = A.dim
    I = np.eye(d)
    L = np.concatenate([np.kron(B, I) - np.kron(I, B.T) for B in A.basis])
    _, s, Vh = np.linalg.svd(L, full_matrices=True)
    s_full = np.zeros(d * d)
    s_full[: s.size] = s
    null = np.conj(Vh[s_full <= tol * max(1.0, s_full[0])])
    basis = orthonormal_span(null.reshape(-1, d, d), d, tol)
    basis.setflags(write=False)
    return MatrixStarAlgebra(d, basis)


def is_von_neumann(A, tol=SPAN_TOL):
    """Double-commutant test: ``span(A'') == span(A)``."""
    return commutant(commutant(A, tol), tol).same_span(A, tol)


# --------------------------------------------------------------------------- #
#                               check-A membership                            #
# --------------------------------------------------------------------------- #

@dataclass
class CheckAResult:
    member: bool
    min_eig: float
    witness: np.ndarray = None  # kernel vector v, rho = v v* vanishes
    probes_checked: int = 0
    probes_vanished: int = 0
    probe_agreement: bool = True

    def __bool__(self):
        return self.member


def in_check_A(a, A=None, probes=None, tol=TRACE_TOL):
    """Decide whether ``a`` belongs to the check-A set of ``A``.

    ``A`` may be ``None`` to skip the span precondition. ``probes`` is an
    optional list of states; each is pushed through the conjugation action and
    the outcome is compared with the certificate.
    """
    a = as_matrix(a)
    if A is not None and not A.contains(a):
        raise NotInAlgebra("operator is not in the algebra span")
    w, V = np.linalg.eigh(dagger(a) @ a)
    min_eig = float(w[0])
    member = min_eig > tol
    witness = None if member else V[:, 0]
    res = CheckAResult(member, min_eig, witness)
    if probes:
        for p in probes:
            res.probes_checked += 1
            if conj_act(a, p, tol_trace=tol) is VANISHED:
                res.probes_vanished += 1
        # a vanished probe contradicts a positive certificate; the converse needs the witness
        res.probe_agreement = not (member and res.probes_vanished)
    return res


def kernel_probe(a, tol=TRACE_TOL):
    """Brute-force check-A decision independent of :func:`in_check_A`.

    Computes a kernel basis from the SVD of ``a`` itself and probes every
    rank-one projector onto it. Returns ``(member, witness)``.
    """
    a = as_matrix(a)
    _, s, Vh = np.linalg.svd(a)
    s_full = np.zeros(a.shape[1])
    s_full[: s.size] = s
    kernel = np.conj(Vh[s_full <= np.sqrt(tol)])
    for v in kernel:
        if conj_act(a, np.outer(v, np.conj(v)), tol_trace=tol) is VANISHED:
            return False, v
    return True, None


# --------------------------------------------------------------------------- #
#                        regular elements / group checks                      #
# --------------------------------------------------------------------------- #

@dataclass
class GateSet:
    names: list
    gates: list

    @classmethod
    def of(cls, gates):
        if isinstance(gates, GateSet):
            return gates
        if isinstance(gates, dict):
            return cls(list(gates), [as_matrix(g) for g in gates.values()])
        gates = [as_matrix(g) for g in gates]
        return cls([f"g{i}" for i in range(len(gates))], gates)

    def __len__(self):
        return len(self.gates)

    def __iter__(self):
        return iter(zip(self.names, self.gates))

    def unitary_flags(self, tol=1e-10):
        return [max_norm(g @ dagger(g) - np.eye(g.shape[0])) <= tol for g in self.gates]


@dataclass
class GroupReport:
    identity_in_span: bool
    non_invertible: list
    outside_check_A: list
    closed_under_products: bool
    inverses_in_span: bool
    generated_size: int
    extends_input: bool
    note: str = ("inverse membership is tested numerically (residual <= 1e-8 in the "
                 "algebra span), an approximation of exact regularity")

    @property
    def is_group(self):
        return (self.identity_in_span and not self.non_invertible and not self.outside_check_A
                and self.closed_under_products and self.inverses_in_span)


def _dedup_insert(found, M, tol=1e-9):
    if any(max_norm(M - F) <= tol for F in found):
        return False
    found.append(M)
    return True


def finite_closure(gates, max_elements=256, tol=1e-9):
    """All distinct products of ``gates`` (plus identity), capped at ``max_elements``."""
    if not gates:
        return []
    d = gates[0].shape[0]
    found = [np.eye(d, dtype=np.complex128)]
    queue = deque(found)
    while queue and len(found) < max_elements:
        M = queue.popleft()
        for g in gates:
            P = g @ M
            if _dedup_insert(found, P, tol):
                queue.append(P)
                if len(found) >= max_elements:
                    break
    return found


def regular_subgroup_check(gates, A, inv_tol=1e-8, cond_max=1e12):
    """Check the group axioms of check-A intersected with the regular elements."""
    gs = GateSet.of(gates)
    d = A.dim
    identity_in_span = A.contains(np.eye(d))
    non_invertible, outside = [], []
    inverses_ok = True
    for name, g in gs:
        if not A.contains(g):
            raise NotInAlgebra(f"gate {name!r} is not in the algebra span")
        if not in_check_A(g).member:
            outside.append(name)
        if np.linalg.cond(g) > cond_max:
            non_invertible.append(name)
            continue
        inv = np.linalg.inv(g)
        if span_residual(A.basis, inv) > inv_tol * max(1.0, float(np.linalg.norm(inv))):
            inverses_ok = False
    closed = True
    for (_, g), (_, h) in product(gs, repeat=2):
        P = g @ h
        if not A.contains(P) or np.linalg.cond(P) > cond_max:
            closed = False
    usable = [g for (n, g) in gs if n not in non_invertible]
    closure = finite_closure(usable)
    extends = any(all(max_norm(M - g) > 1e-9 for g in gs.gates) for M in closure)
    return GroupReport(identity_in_span, non_invertible, outside, closed, inverses_ok,
                       len(closure), extends)


# --------------------------------------------------------------------------- #
#                                    orbits                                   #
# --------------------------------------------------------------------------- #

def _features(M):
    M = np.asarray(M)
    iu = np.triu_indices(M.shape[0])
    z = M[iu]
    # off-diagonals count twice in the Frobenius norm
    w = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return np.concatenate([w * z.real, w * z.imag])


class _StateSet:
    """States kept exactly, deduplicated by trace distance with a KD-tree prefilter.

    Frobenius distance never exceeds twice the trace distance, so every state
    within trace distance ``tol`` lies inside the Frobenius ball of radius ``2 tol``.
    """

    def __init__(self, tol):
        self.tol = tol
        self.states = []
        self._feats = []
        self._tree = None
        self._tree_n = 0
        self._pending = []

    def _rebuild(self):
        if self._feats:
            self._tree = cKDTree(np.array(self._feats))
            self._tree_n = len(self._feats)
        self._pending = []

    def find(self, M):
        f = _features(M)
        cand = []
        if self._tree is not None:
            cand = self._tree.query_ball_point(f, 2 * self.tol + 1e-15)
        cand = list(cand) + self._pending
        for i in cand:
            if trace_distance(self.states[i], M) <= self.tol:
                return i
        return None

    def add(self, M):
        self.states.append(M)
        self._feats.append(_features(M))
        self._pending.append(len(self.states) - 1)
        if len(self._pending) > 64:
            self._rebuild()

    def __len__(self):
        return len(self.states)


def orbit(rho0, gates, max_depth=8, tol=1e-9, check=True, max_states=None):
    """Breadth-first orbit of ``rho0`` under normalised conjugation by ``gates``.

    The identity word is included, so ``rho0`` is always the first element.
    Images within trace distance ``tol`` of a known state are dropped; kept
    states are exact images of gate words. Returns a list of DensityOperator.
    """
    rho0 = density(rho0)
    gs = GateSet.of(gates)
    if check:
        for name, g in gs:
            cert = in_check_A(g)
            if not cert.member:
                raise GateOutsideCheckA(name, cert.min_eig)
    found = _StateSet(tol)
    found.add(rho0.matrix)
    frontier = [rho0.matrix]
    for _ in range(max_depth):
        nxt = []
        for S in frontier:
            for g in gs.gates:
                img = g @ S @ dagger(g)
                tr = np.real(np.trace(img))
                if tr <= TRACE_TOL:
                    continue
                img = img / tr
                img = 0.5 * (img + dagger(img))
                if found.find(img) is None:
                    found.add(img)
                    nxt.append(img)
                    if max_states is not None and len(found) >= max_states:
                        return [DensityOperator(M) for M in found.states]
        if not nxt:
            break
        frontier = nxt
    return [DensityOperator(M) for M in found.states]


@dataclass
class UniversalityReport:
    reachable_fraction: float
    n_targets: int
    orbit_size: int
    depth: int
    eps: float
    distances: np.ndarray = field(repr=False)
    exactness: str = "statistical"


def universality_probe(gates, d, n_targets=200, depth=10, eps=0.05, seed=0,
                       targets=None, fiducial=None, dedup=None):
    """Fraction of target states reachable from a fiducial state within ``eps``.

    Targets are Haar-random pure states unless given. The orbit is explored
    breadth-first to ``depth`` with deduplication at ``dedup`` (default
    ``eps / 10``); every kept state is an exact orbit element, so reported
    reachability is never overstated. This is a statistical probe, not a proof.
    """
    rng = rng_from(seed)
    gs = GateSet.of(gates)
    for name, g in gs:
        if max_norm(g @ dagger(g) - np.eye(d)) > 1e-10:
            raise ValueError(f"gate {name!r} is not unitary")
    if fiducial is None:
        fiducial = np.zeros(d, dtype=np.complex128)
        fiducial[0] = 1.0
        fiducial = pure(fiducial)
    if targets is None:
        targets = [random_ket(d, rng) for _ in range(n_targets)]
    target_mats = [np.asarray(t) if np.ndim(t) == 2 else np.outer(t, np.conj(t)) for t in targets]
    orb = orbit(fiducial, gs, max_depth=depth, tol=eps / 10 if dedup is None else dedup, check=False)
    feats = np.array([_features(S.matrix) for S in orb])
    tree = cKDTree(feats)
    dists = np.empty(len(target_mats))
    for i, T in enumerate(target_mats):
        # nearest in Frobenius metric, then exact trace distance over the candidates
        r = max(2 * eps, 1e-12)
        idx = tree.query_ball_point(_features(T), r)
        if idx:
            dists[i] = min(trace_distance(orb[j].matrix, T) for j in idx)
        else:
            dists[i] = tree.query(_features(T))[0] / 2  # lower bound, already > eps
    frac = float(np.mean(dists <= eps)) if len(dists) else 0.0
    return UniversalityReport(frac, len(target_mats), len(orb), depth, eps, dists)


def unnormalized(M):
    return UnnormalizedState(np.asarray(M, dtype=np.complex128))
