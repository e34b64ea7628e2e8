"""Dense complex linear algebra used everywhere else in the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Hermiticity is
checked with an absolute entrywise tolerance (max-norm), default ``1e-10``.
"""
from functools import reduce

import numpy as np

from . import kernels

HERMITIAN_TOL = 1e-10


class ShapeMismatch(ValueError):
    pass


class NotHermitian(ValueError):
    def __init__(self, deviation, tol):
        super().__init__(f"matrix is not Hermitian: max|M - M*| = {deviation:.3e} > {tol:.1e}")
        self.deviation = deviation


def as_matrix(M):
    """Return ``M`` as a finite 2-d complex128 array."""
    A = np.asarray(M, dtype=np.complex128)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    if A.ndim != 2:
        raise ShapeMismatch(f"expected a matrix, got an array of shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def dagger(M):
    return np.conj(np.swapaxes(M, -1, -2))


def max_norm(M):
    return float(np.max(np.abs(M))) if np.size(M) else 0.0


def hermiticity_defect(M):
    return max_norm(M - dagger(M))


def as_hermitian(M, tol=HERMITIAN_TOL):
    """Validate Hermiticity and return the exactly-symmetrised matrix."""
    A = as_matrix(M)
    if A.shape[0] != A.shape[1]:
        raise ShapeMismatch(f"Hermitian operator must be square, got {A.shape}")
    dev = hermiticity_defect(A)
    if dev > tol:
        raise NotHermitian(dev, tol)
    return 0.5 * (A + dagger(A))


def check_dims(dims, dim=None):
    """Validate a tensor shape (tuple of local dimensions) against ``dim``."""
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise ShapeMismatch(f"invalid local dimensions {dims}")
    if dim is not None and int(np.prod(dims, dtype=np.int64)) != dim:
        raise ShapeMismatch(f"local dimensions {dims} do not multiply to {dim}")
    return dims


def tensor(*ops):
    """Kronecker product; the leftmost factor owns the most significant index."""
    if not ops:
        return np.ones((1, 1), dtype=np.complex128)
    return reduce(np.kron, [np.asarray(o, dtype=np.complex128) for o in ops])


def partial_trace(M, dims, keep):
    """Trace out every factor not listed in ``keep``.

    The kept factors appear in ascending order in the result. Keeping all
    factors returns a copy of ``M``.
    """
    M = as_matrix(M)
    dims = check_dims(dims, M.shape[0])
    if M.shape[0] != M.shape[1]:
        raise ShapeMismatch("partial trace needs a square matrix")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ShapeMismatch(f"keep indices {keep} out of range for {len(dims)} factors")
    if len(keep) == len(dims):
        return M.copy()
    return kernels.partial_trace(M, dims, keep)


def partial_transpose(M, dims, subset):
    M = np.asarray(M, dtype=np.complex128)
    dims = check_dims(dims, M.shape[-1])
    return kernels.partial_transpose(M, dims, sorted(subset))


def embed_operator(op, dims, targets):
    """``op`` acting on factors ``targets`` of ``dims``, identity elsewhere."""
    op = as_matrix(op)
    dims = check_dims(dims)
    targets = sorted(int(t) for t in targets)
    dt = int(np.prod([dims[t] for t in targets], dtype=np.int64))
    if op.shape != (dt, dt):
        raise ShapeMismatch(f"operator of shape {op.shape} cannot act on factors {targets} of {dims}")
    return kernels.embed_operator(op, dims, targets)


def _phase_fix(V, tol=1e-12):
    # first component with modulus above tol made real positive, per column
    V = V.copy()
    for k in range(V.shape[1]):
        col = V[:, k]
        idx = np.flatnonzero(np.abs(col) > tol)
        if idx.size:
            z = col[idx[0]]
            V[:, k] = col * (abs(z) / z)
    return V


def eig_hermitian(H, tol=HERMITIAN_TOL):
    """Ascending eigenvalues and a unitary eigenbasis of a Hermitian matrix.

    Each eigenvector is normalised so that its first non-negligible component
    is real and positive.
    """
    H = as_hermitian(H, tol)
    w, V = np.linalg.eigh(H)
    return w, _phase_fix(V)


def expm_i(H, t=1.0, tol=HERMITIAN_TOL):
    """``exp(-i t H)`` through the spectral decomposition of ``H``."""
    H = as_hermitian(H, tol)
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * t * w)) @ dagger(V)


def operator_norm(M):
    return float(np.linalg.norm(M, 2)) if np.size(M) else 0.0


def trace_norm(M):
    M = np.asarray(M, dtype=np.complex128)
    if hermiticity_defect(M) <= 1e-12:
        return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (M + dagger(M))))))
    return float(np.sum(np.linalg.svd(M, compute_uv=False)))


def trace_distance(rho, sigma):
    return 0.5 * trace_norm(np.asarray(rho) - np.asarray(sigma))


def commutator(A, B):
    return A @ B - B @ A


def is_unitary(U, tol=1e-10):
    U = np.asarray(U)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        return False
    return max_norm(U @ dagger(U) - np.eye(U.shape[0])) <= tol


# --------------------------------------------------------------------------- #
#                          matrix <-> JSON objects                            #
# --------------------------------------------------------------------------- #

def matrix_to_obj(M):
    """Serialise to ``{"rows", "cols", "entries": [[re, im], ...]}`` (row-major)."""
    M = as_matrix(M)
    flat = M.ravel()
    return {
        "rows": int(M.shape[0]),
        "cols": int(M.shape[1]),
        "entries": [[float(z.real), float(z.imag)] for z in flat],
    }


def matrix_from_obj(obj):
    try:
        rows, cols, entries = int(obj["rows"]), int(obj["cols"]), obj["entries"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"matrix object needs rows, cols and entries: {exc}") from None
    if len(entries) != rows * cols:
        raise ValueError(f"matrix object has {len(entries)} entries, expected {rows * cols}")
    arr = np.empty(rows * cols, dtype=np.complex128)
    for k, e in enumerate(entries):
        if isinstance(e, (int, float)):
            arr[k] = complex(e)
        else:
            re, im = e
            arr[k] = complex(float(re), float(im))
    return as_matrix(arr.reshape(rows, cols))


PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}
HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
T_GATE = np.diag([1, np.exp(1j * np.pi / 4)]).astype(np.complex128)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128)
