"""Kraus channels, POVMs, Choi matrices and tensor-embedding isometries."""
from dataclasses import dataclass, field

import numpy as np

from .matcore import ShapeMismatch, as_matrix, check_dims, dagger, max_norm, tensor
from .states import COMPLETENESS_TOL, CompletenessViolated, DensityOperator, density

CP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """A trace-preserving map ``rho -> sum_j E_j rho E_j*``.

    Construction fails with :class:`CompletenessViolated` unless
    ``sum_j E_j* E_j = I`` within ``tol``.
    """

    kraus: tuple
    tol: float = COMPLETENESS_TOL
    residual: float = field(init=False)

    def __post_init__(self):
        ops = tuple(as_matrix(E) for E in self.kraus)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        shape = ops[0].shape
        if any(E.shape != shape for E in ops):
            raise ShapeMismatch("Kraus operators have different shapes")
        for E in ops:
            E.setflags(write=False)
        total = sum(dagger(E) @ E for E in ops)
        residual = max_norm(total - np.eye(shape[1]))
        object.__setattr__(self, "kraus", ops)
        object.__setattr__(self, "residual", residual)
        if residual > self.tol:
            raise CompletenessViolated(residual)

    @property
    def input_dim(self):
        return self.kraus[0].shape[1]

    @property
    def output_dim(self):
        return self.kraus[0].shape[0]

    def __call__(self, M):
        M = np.asarray(M, dtype=np.complex128)
        return sum(E @ M @ dagger(E) for E in self.kraus)

    def apply(self, rho):
        return apply(self, rho)

    def __matmul__(self, other):
        """Composition ``self o other``."""
        return KrausChannel([A @ B for A in self.kraus for B in other.kraus])


@dataclass(frozen=True, eq=False)
class LinearMap:
    """An arbitrary linear map on matrices, e.g. the transpose; never assumed CP."""

    fn: object
    input_dim: int
    output_dim: int

    def __call__(self, M):
        return np.asarray(self.fn(np.asarray(M, dtype=np.complex128)), dtype=np.complex128)


def apply(C, rho):
    rho = density(rho)
    if rho.dim != C.input_dim:
        raise ShapeMismatch(f"channel expects dimension {C.input_dim}, state has {rho.dim}")
    out = C(rho.matrix)
    return DensityOperator(0.5 * (out + dagger(out)), tol_trace=1e-8)


def tensor_channel(C1, C2):
    return KrausChannel([np.kron(A, B) for A in C1.kraus for B in C2.kraus])


def choi(C):
    """Choi matrix ``(I (x) C)(|Omega><Omega|)`` with unnormalised ``|Omega> = sum_i |ii>``.

    The ancilla (input copy) is the left factor.
    """
    din, dout = C.input_dim, C.output_dim
    if isinstance(C, KrausChannel):
        # (I (x) E)|Omega> = sum_i |i> (x) E|i>, i.e. vec of E^T
        vecs = np.array([E.T.reshape(din * dout) for E in C.kraus])
        J = vecs.T @ np.conj(vecs)
    else:
        J = np.zeros((din * dout, din * dout), dtype=np.complex128)
        for i in range(din):
            for j in range(din):
                Eij = np.zeros((din, din), dtype=np.complex128)
                Eij[i, j] = 1.0
                J += np.kron(Eij, C(Eij))
    return 0.5 * (J + dagger(J))


def choi_min_eig(C):
    return float(np.linalg.eigvalsh(choi(C))[0])


def is_completely_positive(C, tol=CP_TOL):
    """CP iff the Choi matrix is PSD; ancilla dimension = input dimension suffices."""
    return choi_min_eig(C) >= -tol


def is_trace_preserving(C, tol=CP_TOL):
    J = choi(C)
    din, dout = C.input_dim, C.output_dim
    reduced = np.trace(J.reshape(din, dout, din, dout), axis1=1, axis2=3)
    return max_norm(reduced - np.eye(din)) <= tol


@dataclass
class ChannelReport:
    input_dim: int
    output_dim: int
    choi_min_eig: float
    completely_positive: bool
    trace_preserving: bool

    @property
    def cptp(self):
        return self.completely_positive and self.trace_preserving


def check_channel(C, tol=CP_TOL):
    lam = choi_min_eig(C)
    return ChannelReport(C.input_dim, C.output_dim, lam, lam >= -tol, is_trace_preserving(C, tol))


# --------------------------------------------------------------------------- #
#                                   POVMs                                     #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True, eq=False)
class Povm:
    effects: dict

    def __post_init__(self):
        effects = {k: as_matrix(M) for k, M in self.effects.items()}
        if not effects:
            raise ValueError("a POVM needs at least one effect")
        d = next(iter(effects.values())).shape[0]
        for k, M in effects.items():
            if max_norm(M - dagger(M)) > 1e-10:
                raise ValueError(f"effect {k!r} is not Hermitian")
            if np.linalg.eigvalsh(0.5 * (M + dagger(M)))[0] < -1e-10:
                raise ValueError(f"effect {k!r} is not positive semidefinite")
        residual = max_norm(sum(effects.values()) - np.eye(d))
        if residual > COMPLETENESS_TOL:
            raise CompletenessViolated(residual)
        object.__setattr__(self, "effects", effects)

    def probabilities(self, rho):
        R = np.asarray(rho, dtype=np.complex128)
        return {k: float(np.real(np.trace(M @ R))) for k, M in self.effects.items()}


def povm_from_kraus(groups):
    """Effects ``M_m = sum_j E_j^m* E_j^m`` for a Kraus family grouped by outcome."""
    if isinstance(groups, dict):
        items = list(groups.items())
    else:
        items = list(enumerate(groups))
    effects = {}
    for label, ops in items:
        ops = [as_matrix(E) for E in ops]
        effects[label] = sum(dagger(E) @ E for E in ops)
    return Povm(effects)


# --------------------------------------------------------------------------- #
#                        embeddings and matrix blocks                         #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True, eq=False)
class EmbedIsometry:
    """``K phi = phi`` with the unit vector ``psi`` inserted as factor ``factor``.

    The domain is the tensor product of all factors of ``dims`` except
    ``factor`` (in order); the codomain is the full product.
    """

    dims: tuple
    factor: int
    psi: np.ndarray

    def __post_init__(self):
        dims = check_dims(self.dims)
        psi = np.asarray(self.psi, dtype=np.complex128).ravel()
        if psi.size != dims[self.factor]:
            raise ShapeMismatch(f"psi has length {psi.size}, factor {self.factor} has dim {dims[self.factor]}")
        if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
            raise ValueError("psi must be a unit vector")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "psi", psi)

    @property
    def matrix(self):
        left = int(np.prod(self.dims[: self.factor], dtype=np.int64))
        right = int(np.prod(self.dims[self.factor + 1:], dtype=np.int64))
        return tensor(np.eye(left), self.psi.reshape(-1, 1), np.eye(right))

    def __call__(self, phi):
        """Embed a state vector (1-d) or an operator (``K a K*``)."""
        K = self.matrix
        phi = np.asarray(phi, dtype=np.complex128)
        if phi.ndim == 1:
            return K @ phi
        return K @ phi @ dagger(K)

    def adjoint(self, v):
        return dagger(self.matrix) @ np.asarray(v, dtype=np.complex128)


def basis_isometries(dims, factor=-1):
    """``K_i`` for every computational basis vector ``e_i`` of one factor."""
    dims = check_dims(dims)
    factor = factor % len(dims)
    d = dims[factor]
    return [EmbedIsometry(dims, factor, np.eye(d)[i]) for i in range(d)]


def block(a, dims, i, j, factor=-1):
    """Matrix block ``a_ij = K_i* a K_j`` relative to ``factor`` (default last)."""
    a = as_matrix(a)
    Ks = basis_isometries(dims, factor)
    return dagger(Ks[i].matrix) @ a @ Ks[j].matrix


def blocks(a, dims, factor=-1):
    Ks = [K.matrix for K in basis_isometries(dims, factor)]
    a = as_matrix(a)
    return [[dagger(Ki) @ a @ Kj for Kj in Ks] for Ki in Ks]


def reassemble(parts, dims, factor=-1):
    """Inverse of :func:`blocks`: ``sum_ij K_i a_ij K_j*``."""
    Ks = [K.matrix for K in basis_isometries(dims, factor)]
    return sum(Ks[i] @ parts[i][j] @ dagger(Ks[j]) for i in range(len(Ks)) for j in range(len(Ks)))


def partial_trace_channel(dims, keep):
    """Kraus form of the partial trace: products of ``K_i*`` over every traced factor."""
    dims = check_dims(dims)
    keep = sorted(keep)
    traced = [k for k in range(len(dims)) if k not in keep]
    ops = [np.eye(int(np.prod(dims, dtype=np.int64)), dtype=np.complex128)]
    cur = list(dims)
    # trace highest factors first so the remaining indices stay valid
    for f in sorted(traced, reverse=True):
        Ks = [dagger(K.matrix) for K in basis_isometries(cur, f)]
        ops = [Kd @ E for E in ops for Kd in Ks]
        cur.pop(f)
    return KrausChannel(ops)


# --------------------------------------------------------------------------- #
#                              standard channels                              #
# --------------------------------------------------------------------------- #

def identity_channel(d):
    return KrausChannel([np.eye(d)])


def unitary_channel(U):
    return KrausChannel([U])


def dephasing(d=2):
    return KrausChannel([np.diag(np.eye(d)[i]) for i in range(d)])


def bit_flip(p):
    X = np.array([[0, 1], [1, 0]])
    return KrausChannel([np.sqrt(1 - p) * np.eye(2), np.sqrt(p) * X])


def amplitude_damping(gamma):
    return KrausChannel([np.array([[1, 0], [0, np.sqrt(1 - gamma)]]),
                         np.array([[0, np.sqrt(gamma)], [0, 0]])])


def depolarizing(p, d=2):
    """``rho -> (1 - p) rho + p I/d`` via the Weyl (clock-and-shift) operators."""
    w = np.exp(2j * np.pi / d)
    Xs = np.roll(np.eye(d), 1, axis=0)
    Zs = np.diag(w ** np.arange(d))
    ops = []
    for a in range(d):
        for b in range(d):
            W = np.linalg.matrix_power(Xs, a) @ np.linalg.matrix_power(Zs, b)
            c = 1 - p + p / d ** 2 if (a, b) == (0, 0) else p / d ** 2
            ops.append(np.sqrt(c) * W)
    return KrausChannel(ops)


def transpose_map(d):
    return LinearMap(lambda M: M.T, d, d)


def random_channel(din, dout, n_kraus, rng):
    """Random Kraus channel from a Haar-like isometry ``C^din -> C^(n dout)``."""
    G = (rng.standard_normal((n_kraus * dout, din)) + 1j * rng.standard_normal((n_kraus * dout, din)))
    Q, R = np.linalg.qr(G)
    V = Q * (np.diag(R) / np.abs(np.diag(R)))
    return KrausChannel([V[k * dout:(k + 1) * dout] for k in range(n_kraus)])


# --------------------------------------------------------------------------- #

def channel_to_obj(C, outcome_groups=None):
    from .matcore import matrix_to_obj

    obj = {"input_dim": C.input_dim, "output_dim": C.output_dim,
           "kraus": [matrix_to_obj(E) for E in C.kraus]}
    if outcome_groups is not None:
        obj["outcome_groups"] = [list(g) for g in outcome_groups]
    return obj


def channel_from_obj(obj, tol=COMPLETENESS_TOL):
    """Parse a channel file. Returns ``(KrausChannel, outcome_groups or None)``."""
    from .matcore import matrix_from_obj

    ops = [matrix_from_obj(m) for m in obj["kraus"]]
    din, dout = int(obj["input_dim"]), int(obj["output_dim"])
    for E in ops:
        if E.shape != (dout, din):
            raise ShapeMismatch(f"Kraus operator of shape {E.shape} does not map {din} -> {dout}")
    groups = obj.get("outcome_groups")
    return KrausChannel(ops, tol=tol), groups
