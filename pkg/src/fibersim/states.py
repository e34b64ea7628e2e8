"""Density operators, unnormalised states and the conjugation action.

A :class:`DensityOperator` is Hermitian, positive semidefinite (smallest
eigenvalue at least ``-tol_psd``) and has unit trace within ``tol_trace``.
An :class:`UnnormalizedState` drops the unit-trace condition but keeps a
strictly positive trace. Conjugating a state with an operator that kills it
returns the :data:`VANISHED` sentinel instead of a zero matrix.
"""
from dataclasses import dataclass, field

import numpy as np

from .matcore import HERMITIAN_TOL, ShapeMismatch, as_hermitian, as_matrix, dagger, max_norm

PSD_TOL = 1e-10
TRACE_TOL = 1e-10
COMPLETENESS_TOL = 1e-8


class NotPositive(ValueError):
    pass


class TraceNonPositive(ValueError):
    pass


class NotNormalized(ValueError):
    pass


class CompletenessViolated(ValueError):
    def __init__(self, residual):
        super().__init__(f"Kraus family is not complete: max|sum E*E - I| = {residual:.3e}")
        self.residual = residual


class _Vanished:
    """The state was annihilated: its trace dropped to (numerically) zero."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "VANISHED"

    def __bool__(self):
        return False


VANISHED = _Vanished()


def _min_eig(M):
    return float(np.linalg.eigvalsh(M)[0])


@dataclass(frozen=True, eq=False)
class UnnormalizedState:
    matrix: np.ndarray
    tol_psd: float = PSD_TOL
    tol_trace: float = TRACE_TOL
    tol_herm: float = field(default=HERMITIAN_TOL, repr=False)

    def __post_init__(self):
        M = as_hermitian(self.matrix, self.tol_herm)
        scale = max(1.0, float(np.real(np.trace(M))))
        lam = _min_eig(M)
        if lam < -self.tol_psd * scale:
            raise NotPositive(f"smallest eigenvalue {lam:.3e} below -{self.tol_psd:.1e}")
        if np.real(np.trace(M)) <= self.tol_trace:
            raise TraceNonPositive(f"trace {np.real(np.trace(M)):.3e} is not positive")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def trace(self):
        return float(np.real(np.trace(self.matrix)))

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


@dataclass(frozen=True, eq=False)
class DensityOperator(UnnormalizedState):
    def __post_init__(self):
        super().__post_init__()
        if abs(self.trace - 1.0) > self.tol_trace:
            raise NotNormalized(f"trace {self.trace!r} differs from 1 by more than {self.tol_trace:.1e}")

    def purity(self):
        return purity(self)

    def is_pure(self):
        return purity(self) >= 1.0 - 1e-9


def density(M, **tols):
    """Coerce a matrix (or existing state) to a :class:`DensityOperator`."""
    if isinstance(M, DensityOperator) and not tols:
        return M
    return DensityOperator(np.asarray(M, dtype=np.complex128), **tols)


def pure(psi):
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    psi = psi / np.linalg.norm(psi)
    return DensityOperator(np.outer(psi, np.conj(psi)))


def normalize(sigma):
    """``sigma / Tr(sigma)``; idempotent on density operators."""
    if not isinstance(sigma, UnnormalizedState):
        sigma = UnnormalizedState(np.asarray(sigma, dtype=np.complex128))
    if isinstance(sigma, DensityOperator):
        return sigma
    return DensityOperator(sigma.matrix / sigma.trace, tol_psd=sigma.tol_psd)


def conj_act(a, sigma, tol_trace=TRACE_TOL):
    """The conjugation action ``a sigma a*``, or VANISHED if the trace collapses.

    VANISHED is absorbing: acting on it returns it unchanged.
    """
    if sigma is VANISHED:
        return VANISHED
    a = as_matrix(a)
    S = np.asarray(sigma, dtype=np.complex128)
    if a.shape[1] != S.shape[0]:
        raise ShapeMismatch(f"operator of shape {a.shape} cannot act on a {S.shape[0]}-dim state")
    out = a @ S @ dagger(a)
    out = 0.5 * (out + dagger(out))
    if np.real(np.trace(out)) <= tol_trace:
        return VANISHED
    return UnnormalizedState(out, tol_trace=tol_trace)


@dataclass(frozen=True)
class Outcome:
    outcome: int
    probability: float
    state: object  # DensityOperator or VANISHED


def completeness_residual(operators):
    ops = [as_matrix(E) for E in operators]
    d = ops[0].shape[1]
    total = sum(dagger(E) @ E for E in ops)
    return max_norm(total - np.eye(d))


def measure(rho, kraus_groups, tol=COMPLETENESS_TOL, tol_trace=TRACE_TOL):
    """Measure ``rho`` with a Kraus family grouped by outcome.

    ``kraus_groups[k]`` lists the operators ``E^k_j`` of outcome ``k``. Returns
    one :class:`Outcome` per group with ``p_k = Tr(sum_j E rho E*)`` and the
    normalised post-measurement state (VANISHED when ``p_k <= tol_trace``).
    """
    rho = density(rho)
    groups = [[as_matrix(E) for E in g] for g in kraus_groups]
    flat = [E for g in groups for E in g]
    if not flat:
        raise CompletenessViolated(1.0)
    residual = completeness_residual(flat)
    if residual > tol:
        raise CompletenessViolated(residual)
    out = []
    for k, g in enumerate(groups):
        M = sum((E @ rho.matrix @ dagger(E) for E in g), np.zeros_like(rho.matrix))
        p = float(np.real(np.trace(M)))
        state = VANISHED if p <= tol_trace else DensityOperator(0.5 * (M + dagger(M)) / p)
        out.append(Outcome(k, p, state))
    return out


def purity(rho):
    R = np.asarray(rho, dtype=np.complex128)
    return float(np.real(np.vdot(R, R)))


# --------------------------------------------------------------------------- #
#                               common states                                 #
# --------------------------------------------------------------------------- #

def ket(bits, d=2):
    """Computational basis ket, e.g. ``ket("01")`` or ``ket([0, 1], d=3)``."""
    digits = [int(b) for b in bits]
    v = np.zeros(d ** len(digits), dtype=np.complex128)
    idx = 0
    for b in digits:
        idx = idx * d + b
    v[idx] = 1.0
    return v


PLUS = np.array([1, 1], dtype=np.complex128) / np.sqrt(2)
MINUS = np.array([1, -1], dtype=np.complex128) / np.sqrt(2)


def bell_state(which="phi+"):
    s = 1 / np.sqrt(2)
    vecs = {
        "phi+": [s, 0, 0, s], "phi-": [s, 0, 0, -s],
        "psi+": [0, s, s, 0], "psi-": [0, s, -s, 0],
    }
    return pure(np.array(vecs[which], dtype=np.complex128))


def maximally_mixed(d):
    return DensityOperator(np.eye(d, dtype=np.complex128) / d)


def werner_state(p):
    """``p |psi-><psi-| + (1 - p) I/4``; entangled iff ``p > 1/3``."""
    return DensityOperator(p * bell_state("psi-").matrix + (1 - p) * np.eye(4) / 4)


def isotropic_state(F):
    """Fidelity-``F`` mixture of ``|phi+>`` with the orthogonal complement."""
    P = bell_state("phi+").matrix
    return DensityOperator(F * P + (1 - F) * (np.eye(4) - P) / 3)
