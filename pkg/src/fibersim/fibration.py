"""Quantum fibrations over finite topological spaces.

Every point carries a local dimension (2 by default). The Hilbert space of an
open set ``U`` is the tensor product of its points in point order, and an
operator on ``V`` is embedded into ``U`` (``V <= U``) as ``b (x) I`` on the
positions of ``V`` inside ``U``. The empty open set has the one-dimensional
space and the scalar algebra; it is skipped by the isotony and restriction
checks because both hold for it trivially.

Assembly checks everything eagerly:

* isotony: ``alg(V)`` embedded lies in ``alg(U)`` for each ``V < U``;
* each gate lies in its algebra and is injective (check-A);
* every restriction map returns density operators on sample states;
* the presheaf law ``r_VW(r_UV(rho)) = r_UW(rho)`` on every chain ``W < V < U``.

The first violation found is raised; its ``all`` attribute lists all of them.
"""
import threading
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .algebra import (SPAN_TOL, GateOutsideCheckA, GateSet, MatrixStarAlgebra, NotInAlgebra,
                      from_span, full_algebra, in_check_A, orbit, scalars, span_residual)
from .channels import KrausChannel, check_channel
from .matcore import (ShapeMismatch, commutator, dagger, embed_operator, expm_i, max_norm,
                      operator_norm, partial_trace)
from .sampling import random_density, rng_from
from .states import DensityOperator, density, measure
from .topology import FiniteTopology, popcount

PRESHEAF_TOL = 1e-12
CPTP_TOL = 1e-9
EMPTY_FIBER = ()


class IsotonyViolation(ValueError):
    def __init__(self, U, V, witness, residual):
        super().__init__(f"algebra of {V} is not contained in algebra of {U} (residual {residual:.3e})")
        self.U, self.V, self.witness, self.residual = U, V, witness, residual


class RestrictionNotDensity(ValueError):
    def __init__(self, U, V, reason):
        super().__init__(f"restriction {U} -> {V} did not return a density operator: {reason}")
        self.U, self.V, self.reason = U, V, reason


class PresheafViolation(ValueError):
    def __init__(self, U, V, W, residual):
        super().__init__(f"restriction {U} -> {V} -> {W} differs from {U} -> {W} by {residual:.3e}")
        self.U, self.V, self.W, self.residual = U, V, W, residual


class GateNotInAlgebra(NotInAlgebra):
    def __init__(self, U, name):
        super().__init__(f"gate {name!r} on {U} is not in the algebra")
        self.U, self.name = U, name


# --------------------------------------------------------------------------- #
#                              restriction maps                               #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class PartialTraceRestriction:
    """Trace out the factors of ``U`` that are not in ``V``."""

    kind = "partial_trace"

    def __call__(self, F, rho, U, V):
        dims = F.dims(U)
        keep = F.positions(V, U)
        return partial_trace(rho, dims, keep)


@dataclass(frozen=True, eq=False)
class ProjectionRestriction:
    """``rho -> Tr_{U\\V}(P rho P) / Tr(P rho P)`` for a projector ``P`` on ``U``."""

    projector: np.ndarray
    kind = "projection"

    def __call__(self, F, rho, U, V):
        P = np.asarray(self.projector, dtype=np.complex128)
        M = P @ np.asarray(rho) @ P
        tr = float(np.real(np.trace(M)))
        if tr <= 1e-12:
            raise RestrictionNotDensity(F.labels(U), F.labels(V), "projection annihilates the state")
        return partial_trace(M / tr, F.dims(U), F.positions(V, U))


PARTIAL_TRACE = PartialTraceRestriction()


# --------------------------------------------------------------------------- #
#                                  fibration                                  #
# --------------------------------------------------------------------------- #

@dataclass(eq=False)
class QuantumFibration:
    topology: FiniteTopology
    local_dims: tuple
    alg: dict                      # open mask -> MatrixStarAlgebra
    init: dict                     # open mask -> DensityOperator
    gates: dict                    # open mask -> GateSet
    restrictions: dict             # (U, V) mask pair -> restriction callable
    orbit_depth: int = 8
    orbit_tol: float = 1e-9
    metadata: dict = field(default_factory=dict)
    _fibers: dict = field(default_factory=dict, repr=False)
    _lock: object = field(default_factory=threading.Lock, repr=False)

    # ---- open-set plumbing -------------------------------------------- #
    def key(self, U):
        """Bitmask of an open given as mask, labels or comma string."""
        if isinstance(U, (int, np.integer)):
            m = int(U)
        elif isinstance(U, str):
            m = self.topology.mask([p for p in U.split(",") if p] if U else [])
        else:
            m = self.topology.mask(U)
        if m not in self.topology.opens:
            raise ValueError(f"{self.topology.labels(m)} is not open")
        return m

    def labels(self, U):
        return self.topology.labels(self.key(U))

    def dims(self, U):
        return tuple(self.local_dims[i] for i in self.topology.indices(self.key(U)))

    def dim(self, U):
        return int(np.prod(self.dims(U), dtype=np.int64))

    def positions(self, V, U):
        """Positions of the points of ``V`` inside the factor list of ``U``."""
        u, v = self.key(U), self.key(V)
        if v & ~u:
            raise ValueError(f"{self.topology.labels(v)} is not contained in {self.topology.labels(u)}")
        idx = self.topology.indices(u)
        return [idx.index(i) for i in self.topology.indices(v)]

    def embed(self, b, V, U):
        u, v = self.key(U), self.key(V)
        if v == u:
            return np.asarray(b, dtype=np.complex128)
        if v == 0:
            return complex(np.asarray(b).ravel()[0]) * np.eye(self.dim(u), dtype=np.complex128)
        return embed_operator(b, self.dims(u), self.positions(v, u))

    # ---- data access --------------------------------------------------- #
    def algebra(self, U):
        return self.alg[self.key(U)]

    def point_algebra(self, x):
        """Algebra of the smallest open neighbourhood of ``x``."""
        return self.algebra(self.topology.smallest_neighborhood(x))

    def restriction(self, U, V):
        return self.restrictions.get((self.key(U), self.key(V)), PARTIAL_TRACE)

    def restrict(self, rho, U, V):
        """Restrict a state on ``U`` to the open ``V <= U``."""
        u, v = self.key(U), self.key(V)
        if v & ~u:
            raise ValueError(f"{self.topology.labels(v)} is not contained in {self.topology.labels(u)}")
        R = np.asarray(rho, dtype=np.complex128)
        if R.shape != (self.dim(u), self.dim(u)):
            raise ShapeMismatch(f"state of shape {R.shape} does not live on {self.topology.labels(u)}")
        if u == v:
            return density(R)
        if v == 0:
            return DensityOperator(np.ones((1, 1), dtype=np.complex128) * np.trace(R))
        out = self.restriction(u, v)(self, R, u, v)
        try:
            return density(out)
        except ValueError as exc:
            raise RestrictionNotDensity(self.topology.labels(u), self.topology.labels(v), str(exc)) from None

    def fiber(self, U):
        """Orbit of ``init(U)`` under ``gates(U)``; :data:`EMPTY_FIBER` without an init."""
        u = self.key(U)
        with self._lock:
            if u in self._fibers:
                return self._fibers[u]
            if u not in self.init:
                result = EMPTY_FIBER
            else:
                gs = self.gates.get(u, GateSet([], []))
                result = tuple(orbit(self.init[u], gs, max_depth=self.orbit_depth,
                                     tol=self.orbit_tol, check=False))
            self._fibers[u] = result
            return result


def _preimage_algebra(F, U, W, AW):
    """``{b on U : embed(b) in AW}``, a subalgebra because embedding is a unital *-map."""
    d = F.dim(U)
    target = AW.basis
    units = []
    for k in range(d * d):
        E = np.zeros((d, d), dtype=np.complex128)
        E.flat[k] = 1.0
        units.append(F.embed(E, U, W))
    L = np.array([M.ravel() for M in units]).T          # columns: embedded matrix units
    T = target.reshape(target.shape[0], -1)
    residual_map = L - T.T @ (np.conj(T) @ L)             # component outside alg(W)
    _, s, Vh = np.linalg.svd(residual_map)
    s_full = np.zeros(d * d)
    s_full[: s.size] = s
    null = np.conj(Vh[s_full <= SPAN_TOL * max(1.0, s_full.max(initial=0.0))])
    return from_span([v.reshape(d, d) for v in null], d)


def _key_of(topology, U):
    if isinstance(U, (int, np.integer)):
        return int(U)
    if isinstance(U, str):
        return topology.mask([p for p in U.split(",") if p])
    return topology.mask(U)


def assemble(topology, algebras=None, inits=None, gates=None, restrictions=None, local_dims=None,
             n_sample_states=2, seed=0, orbit_depth=8, orbit_tol=1e-9, raise_first=True):
    """Build and check a :class:`QuantumFibration`.

    ``algebras``, ``inits``, ``gates`` and ``restrictions`` are keyed by open
    sets (labels, comma strings or bitmasks; restriction keys are ``(U, V)``
    pairs). An open without an algebra gets the largest algebra compatible
    with its smallest declared superset, or the full matrix algebra if there
    is none. Restrictions default to the partial trace.

    With ``raise_first`` the first violation is raised (its ``all``
    attribute holds every violation); otherwise the fibration is returned
    with the list in ``metadata["violations"]``.
    """
    algebras, inits, gates, restrictions = algebras or {}, inits or {}, gates or {}, restrictions or {}
    n = len(topology.points)
    if local_dims is None:
        ld = (2,) * n
    elif isinstance(local_dims, dict):
        ld = tuple(int(local_dims.get(p, 2)) for p in topology.points)
    else:
        ld = tuple(int(d) for d in local_dims)
    if len(ld) != n:
        raise ShapeMismatch(f"{len(ld)} local dimensions for {n} points")
    F = QuantumFibration(topology, ld, {}, {}, {}, {}, orbit_depth, orbit_tol)
    F.metadata["covariance"] = "not checked"
    declared = {}
    for U, A in algebras.items():
        u = F.key(_key_of(topology, U))
        if A.dim != F.dim(u):
            raise ShapeMismatch(f"algebra on {topology.labels(u)} has dim {A.dim}, expected {F.dim(u)}")
        declared[u] = A
    F.alg[0] = scalars(1)
    for u in topology.sorted_opens():
        if u == 0:
            continue
        if u in declared:
            F.alg[u] = declared[u]
            continue
        supers = [w for w in declared if w & u == u]
        if supers:
            w = min(supers, key=lambda m: (popcount(m), topology.indices(m)))
            F.alg[u] = _preimage_algebra(F, u, w, declared[w])
        else:
            F.alg[u] = full_algebra(F.dim(u))
    for U, rho in inits.items():
        u = F.key(_key_of(topology, U))
        rho = density(rho)
        if rho.dim != F.dim(u):
            raise ShapeMismatch(f"initial state on {topology.labels(u)} has dim {rho.dim}, expected {F.dim(u)}")
        F.init[u] = rho
    for U, gs in gates.items():
        F.gates[F.key(_key_of(topology, U))] = GateSet.of(gs)
    for (U, V), r in restrictions.items():
        F.restrictions[(F.key(_key_of(topology, U)), F.key(_key_of(topology, V)))] = r

    violations = []
    violations += _check_isotony(F)
    violations += _check_gates(F)
    violations += _check_restrictions(F, n_sample_states, seed)
    F.metadata["violations"] = violations
    if violations and raise_first:
        first = violations[0]
        first.all = violations
        raise first
    return F


def _check_isotony(F):
    out = []
    T = F.topology
    for v, u in combinations(T.sorted_opens(), 2):
        if v == 0 or v & ~u or v == u:
            continue
        AU = F.alg[u]
        worst, witness = 0.0, None
        for B in F.alg[v].basis:
            E = F.embed(B, v, u)
            r = span_residual(AU.basis, E)
            if r > worst:
                worst, witness = r, B
        if worst > SPAN_TOL:
            out.append(IsotonyViolation(T.labels(u), T.labels(v), witness, worst))
    return out


def _check_gates(F):
    out = []
    T = F.topology
    for u, gs in F.gates.items():
        for name, g in gs:
            if g.shape != (F.dim(u), F.dim(u)) or not F.alg[u].contains(g):
                out.append(GateNotInAlgebra(T.labels(u), name))
                continue
            cert = in_check_A(g)
            if not cert.member:
                exc = GateOutsideCheckA(name, cert.min_eig)
                exc.U, exc.witness = T.labels(u), cert.witness
                out.append(exc)
    return out


def _check_restrictions(F, n_samples, seed):
    out = []
    T = F.topology
    rng = rng_from(seed)
    opens = [m for m in T.sorted_opens() if m]
    samples = {}
    for u in opens:
        s = [F.init[u].matrix] if u in F.init else []
        s += [random_density(F.dim(u), rng).matrix for _ in range(n_samples)]
        samples[u] = s
    # each restriction must produce a state
    images = {}
    for u in opens:
        for v in opens:
            if v == u or v & ~u:
                continue
            try:
                images[(u, v)] = [F.restrict(S, u, v).matrix for S in samples[u]]
            except RestrictionNotDensity as exc:
                out.append(exc)
    # presheaf law along chains w < v < u
    for u in opens:
        for v in opens:
            if v == u or v & ~u or (u, v) not in images:
                continue
            for w in opens:
                if w == v or w & ~v or (u, w) not in images:
                    continue
                worst = 0.0
                for S, Sv in zip(images[(u, w)], images[(u, v)]):
                    try:
                        two_step = F.restrict(Sv, v, w).matrix
                    except RestrictionNotDensity:
                        worst = np.inf
                        break
                    worst = max(worst, max_norm(two_step - S))
                if worst > PRESHEAF_TOL:
                    out.append(PresheafViolation(T.labels(u), T.labels(v), T.labels(w), worst))
    return out


# --------------------------------------------------------------------------- #
#                                causality nets                               #
# --------------------------------------------------------------------------- #

@dataclass
class CausalityReport:
    ok: bool
    worst_pair: tuple
    worst_value: float
    witness: tuple = None
    per_pair: dict = field(default_factory=dict)


@dataclass(eq=False)
class CausalNet:
    fibration: QuantumFibration
    disjoint: frozenset = frozenset()  # frozenset of frozenset({U, V}) masks

    @classmethod
    def declare(cls, F, pairs):
        rel = set()
        for U, V in pairs:
            u, v = F.key(_key_of(F.topology, U)), F.key(_key_of(F.topology, V))
            if u == v and u != 0:
                raise ValueError(f"{F.topology.labels(u)} cannot be causally disjoint from itself")
            rel.add(frozenset((u, v)))
        return cls(F, frozenset(rel))

    def related(self, U, V):
        F = self.fibration
        return frozenset((F.key(_key_of(F.topology, U)), F.key(_key_of(F.topology, V)))) in self.disjoint


def causality_check(net, tol=1e-10):
    """Commutators of all basis pairs of declared causally disjoint opens."""
    F = net.fibration
    T = F.topology
    worst, worst_pair, witness = 0.0, None, None
    per_pair = {}
    for pair in sorted(net.disjoint, key=lambda p: sorted(p)):
        u, v = tuple(pair) if len(pair) == 2 else (next(iter(pair)),) * 2
        w = u | v
        Eu = [F.embed(B, u, w) for B in F.alg[u].basis]
        Ev = [F.embed(B, v, w) for B in F.alg[v].basis]
        pw, pwit = 0.0, None
        for i, A in enumerate(Eu):
            for j, B in enumerate(Ev):
                c = max_norm(commutator(A, B))
                if c > pw:
                    pw, pwit = c, (i, j)
        key = (T.labels(u), T.labels(v))
        per_pair[key] = pw
        if worst_pair is None or pw > worst:
            worst, worst_pair, witness = pw, key, pwit
    if worst_pair is None:
        return CausalityReport(True, None, 0.0)
    return CausalityReport(worst <= tol, worst_pair, worst, witness, per_pair)


# --------------------------------------------------------------------------- #
#                              quantum networks                               #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class Edge:
    source: int
    target: int
    channel: KrausChannel


@dataclass(frozen=True, eq=False)
class QuantumNetwork:
    source: QuantumFibration
    target: QuantumFibration
    edges: tuple = ()

    def connect(self, U, V, C):
        """New network with the edge ``U -> V`` carrying channel ``C``."""
        u = self.source.key(_key_of(self.source.topology, U))
        v = self.target.key(_key_of(self.target.topology, V))
        if not isinstance(C, KrausChannel):
            raise TypeError("network edges carry Kraus channels")
        if C.input_dim != self.source.dim(u) or C.output_dim != self.target.dim(v):
            raise ShapeMismatch(f"channel {C.input_dim}->{C.output_dim} does not fit "
                                f"{self.source.dim(u)}->{self.target.dim(v)}")
        rep = check_channel(C, CPTP_TOL)
        if not rep.cptp:
            raise ValueError(f"channel is not CPTP (Choi min eig {rep.choi_min_eig:.3e})")
        return QuantumNetwork(self.source, self.target, self.edges + (Edge(u, v, C),))

    def edge(self, U, V):
        u = self.source.key(_key_of(self.source.topology, U))
        v = self.target.key(_key_of(self.target.topology, V))
        for e in self.edges:
            if (e.source, e.target) == (u, v):
                return e
        raise KeyError(f"no edge {self.source.topology.labels(u)} -> {self.target.topology.labels(v)}")

    def transmit(self, edge, rho):
        e = edge if isinstance(edge, Edge) else self.edges[edge] if isinstance(edge, int) else self.edge(*edge)
        R = np.asarray(rho, dtype=np.complex128)
        if R.shape != (e.channel.input_dim,) * 2:
            raise ShapeMismatch(f"state of shape {R.shape} does not match the edge input")
        out = e.channel(R)
        return DensityOperator(0.5 * (out + dagger(out)))


def revalidate(net):
    """Re-check CPTP of every edge (used after loading a network)."""
    return [check_channel(e.channel, CPTP_TOL).cptp for e in net.edges]


# --------------------------------------------------------------------------- #
#                             dynamics on an open                             #
# --------------------------------------------------------------------------- #

@dataclass
class TrotterResult:
    state: DensityOperator
    bound: float
    unitary: np.ndarray = field(repr=False)
    exact_error: float = None


def trotter_bound(pieces, t, n_steps):
    """First-order bound ``t^2 / (2n) * sum_{j<k} ||[H_j, H_k]||``."""
    total = 0.0
    for j, k in combinations(range(len(pieces)), 2):
        total += operator_norm(commutator(pieces[j], pieces[k]))
    return t * t * total / (2 * n_steps)


def trotter_unitary(pieces, t, n_steps):
    dt = t / n_steps
    step = np.eye(pieces[0].shape[0], dtype=np.complex128)
    for H in pieces:
        step = expm_i(H, dt) @ step
    return np.linalg.matrix_power(step, n_steps)


def trotter_evolve(F, U, pieces, t, n_steps, rho=None):
    """Evolve ``rho`` (default ``init(U)``) with the product formula for ``sum_j H_j``.

    Pieces act in the listed order within each step. Also returns the error
    against the exact exponential.
    """
    pieces = [np.asarray(H, dtype=np.complex128) for H in pieces]
    if rho is None:
        rho = F.init[F.key(U)]
    R = np.asarray(rho, dtype=np.complex128)
    if F is not None and U is not None and R.shape[0] != F.dim(U):
        raise ShapeMismatch("state does not live on the open set")
    if any(H.shape != R.shape for H in pieces):
        raise ShapeMismatch("Hamiltonian pieces do not match the state dimension")
    Ut = trotter_unitary(pieces, t, n_steps)
    exact = expm_i(sum(pieces), t)
    out = Ut @ R @ dagger(Ut)
    return TrotterResult(DensityOperator(0.5 * (out + dagger(out))), trotter_bound(pieces, t, n_steps), Ut,
                         operator_norm(Ut - exact))


def measure_local(F, U, rho, kraus_groups, targets):
    """Measure the points ``targets`` of the open ``U`` with a local Kraus family."""
    u = F.key(U)
    pos = F.positions(F.topology.mask(targets), u)
    groups = [[embed_operator(E, F.dims(u), pos) for E in g] for g in kraus_groups]
    return measure(rho, groups)


def example_three_qubits():
    """Discrete three-point space with full matrix algebras and partial-trace restrictions."""
    from .topology import discrete

    T = discrete(["1", "2", "3"])
    algs = {}
    for m in T.opens:
        if m:
            algs[m] = full_algebra(2 ** popcount(m))
    return assemble(T, algebras=algs)


__all__ = [
    "CausalNet", "EMPTY_FIBER", "IsotonyViolation", "MatrixStarAlgebra", "PresheafViolation",
    "ProjectionRestriction", "QuantumFibration", "QuantumNetwork", "RestrictionNotDensity",
    "assemble", "causality_check", "example_three_qubits", "measure_local", "trotter_evolve",
]
