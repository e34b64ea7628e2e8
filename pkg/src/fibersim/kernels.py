"""Index-heavy inner loops, each in a numba and a pure-numpy flavour.

The public names (``partial_trace``, ``partial_transpose``, ``embed_operator``,
``conditional_entropies``) dispatch to the numba versions unless the
environment variable ``FIBERSIM_NUMBA`` is set to ``0`` or numba is missing.
Both flavours stay importable as ``*_numpy`` / ``*_numba`` so tests and the
benchmark can compare them directly.

All kernels work on row-major tensor layouts: for local dimensions
``(d_0, ..., d_{n-1})`` the first factor owns the most significant digit.
"""
import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda fn: fn


USE_NUMBA = HAS_NUMBA and os.environ.get("FIBERSIM_NUMBA", "1") != "0"


def digit_offsets(dims, subset):
    """Full-space index contribution of every multi-index over ``subset``.

    Entry ``m`` is the offset contributed by the digits of ``subset`` when the
    subset-local index (row-major over ``subset`` in ascending order) equals
    ``m``; contributions of disjoint subsets add up to the full index.
    """
    dims = [int(d) for d in dims]
    strides = np.ones(len(dims), dtype=np.int64)
    for i in range(len(dims) - 2, -1, -1):
        strides[i] = strides[i + 1] * dims[i + 1]
    offs = np.zeros(1, dtype=np.int64)
    for i in sorted(subset):
        offs = (offs[:, None] + strides[i] * np.arange(dims[i], dtype=np.int64)[None, :]).ravel()
    return offs


def _complement(n, subset):
    s = set(subset)
    return [i for i in range(n) if i not in s]


# --------------------------------------------------------------------------- #
#                                partial trace                                #
# --------------------------------------------------------------------------- #

def partial_trace_numpy(M, dims, keep):
    keep = sorted(keep)
    n = len(dims)
    t = M.reshape(tuple(dims) * 2)
    traced = _complement(n, keep)
    # move kept row axes, kept col axes, then traced row/col pairs to the end
    perm = keep + [n + k for k in keep] + traced + [n + k for k in traced]
    t = t.transpose(perm)
    dk = int(np.prod([dims[k] for k in keep], dtype=np.int64))
    dt = int(np.prod([dims[k] for k in traced], dtype=np.int64))
    t = t.reshape(dk, dk, dt, dt)
    return np.trace(t, axis1=2, axis2=3)


@njit(cache=True)
def _ptrace_loop(M, off_keep, off_tr):
    dk = off_keep.shape[0]
    dt = off_tr.shape[0]
    out = np.zeros((dk, dk), dtype=M.dtype)
    for a in range(dk):
        ra = off_keep[a]
        for b in range(dk):
            cb = off_keep[b]
            acc = 0j
            for k in range(dt):
                acc += M[ra + off_tr[k], cb + off_tr[k]]
            out[a, b] = acc
    return out


def partial_trace_numba(M, dims, keep):
    traced = _complement(len(dims), keep)
    return _ptrace_loop(np.ascontiguousarray(M, dtype=np.complex128),
                        digit_offsets(dims, keep), digit_offsets(dims, traced))


# --------------------------------------------------------------------------- #
#                              partial transpose                              #
# --------------------------------------------------------------------------- #

def partial_transpose_numpy(M, dims, subset):
    """Transpose the factors in ``subset``; ``M`` may carry leading batch axes."""
    n = len(dims)
    batch = M.shape[:-2]
    nb = len(batch)
    t = M.reshape(batch + tuple(dims) * 2)
    perm = list(range(nb + 2 * n))
    for i in subset:
        perm[nb + i], perm[nb + n + i] = perm[nb + n + i], perm[nb + i]
    return t.transpose(perm).reshape(M.shape)


@njit(cache=True)
def _ptranspose_loop(M, off_a, off_b):
    nbatch = M.shape[0]
    na = off_a.shape[0]
    nb = off_b.shape[0]
    out = np.empty_like(M)
    for s in range(nbatch):
        for ia in range(na):
            for ja in range(na):
                for ib in range(nb):
                    for jb in range(nb):
                        out[s, off_a[ia] + off_b[ib], off_a[ja] + off_b[jb]] = \
                            M[s, off_a[ja] + off_b[ib], off_a[ia] + off_b[jb]]
    return out


def partial_transpose_numba(M, dims, subset):
    M = np.ascontiguousarray(M, dtype=np.complex128)
    shape = M.shape
    stack = M.reshape((-1,) + shape[-2:])
    out = _ptranspose_loop(stack, digit_offsets(dims, subset),
                           digit_offsets(dims, _complement(len(dims), subset)))
    return out.reshape(shape)


# --------------------------------------------------------------------------- #
#                     operator placement (A -> A (x) I)                       #
# --------------------------------------------------------------------------- #

def embed_operator_numpy(op, dims, targets):
    """Act with ``op`` on the factors ``targets`` (ascending) and identity elsewhere."""
    targets = sorted(targets)
    n = len(dims)
    rest = _complement(n, targets)
    d_rest = int(np.prod([dims[k] for k in rest], dtype=np.int64))
    big = np.kron(op, np.eye(d_rest, dtype=np.complex128))
    order = targets + rest
    shaped = big.reshape(tuple(dims[k] for k in order) * 2)
    inv = np.argsort(order)
    perm = list(inv) + [n + i for i in inv]
    D = int(np.prod(dims, dtype=np.int64))
    return shaped.transpose(perm).reshape(D, D)


@njit(cache=True)
def _embed_loop(op, off_t, off_r, D):
    out = np.zeros((D, D), dtype=np.complex128)
    nt = off_t.shape[0]
    nr = off_r.shape[0]
    for i in range(nt):
        for j in range(nt):
            v = op[i, j]
            if v == 0:
                continue
            for k in range(nr):
                out[off_t[i] + off_r[k], off_t[j] + off_r[k]] = v
    return out


def embed_operator_numba(op, dims, targets):
    D = int(np.prod(dims, dtype=np.int64))
    return _embed_loop(np.ascontiguousarray(op, dtype=np.complex128),
                       digit_offsets(dims, targets),
                       digit_offsets(dims, _complement(len(dims), targets)), D)


# --------------------------------------------------------------------------- #
#          conditional entropies after a projective qubit measurement         #
# --------------------------------------------------------------------------- #

def _entropy_from_eigs(w):
    w = np.clip(w, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 1e-300, -w * np.log(np.where(w > 1e-300, w, 1.0)), 0.0)
    return terms.sum(axis=-1)


def conditional_entropies_numpy(rho, dA, directions):
    """Average post-measurement entropy of A when the last qubit is measured.

    ``rho`` acts on ``C^dA (x) C^2``; ``directions`` is an ``(m, 2)`` array of
    unit kets. Each ket ``n`` defines the projective measurement
    ``{|n><n|, 1 - |n><n|}``; returned is ``sum_pm p_pm S(rho_A|pm)`` per row.
    """
    t = rho.reshape(dA, 2, dA, 2)
    n = directions
    # orthogonal partner of (a, b) is (-conj(b), conj(a))
    m = np.stack([-np.conj(n[:, 1]), np.conj(n[:, 0])], axis=1)
    out = np.zeros(n.shape[0])
    for vec in (n, m):
        # <v| on the measured qubit, |v> on the right
        cond = np.einsum("mb,abcd,md->mac", np.conj(vec), t, vec)
        p = np.real(np.einsum("maa->m", cond))
        safe = np.where(p > 1e-14, p, 1.0)
        w = np.linalg.eigvalsh(cond / safe[:, None, None])
        out += np.where(p > 1e-14, p * _entropy_from_eigs(w), 0.0)
    return out


@njit(cache=True)
def _cond_entropy_loop(t, dA, directions):
    m_count = directions.shape[0]
    out = np.zeros(m_count)
    cond = np.empty((dA, dA), dtype=np.complex128)
    for m in range(m_count):
        a0 = directions[m, 0]
        a1 = directions[m, 1]
        for side in range(2):
            if side == 0:
                v0, v1 = a0, a1
            else:
                v0, v1 = -np.conj(a1), np.conj(a0)
            p = 0.0
            for i in range(dA):
                for j in range(dA):
                    acc = (np.conj(v0) * t[i, 0, j, 0] * v0 + np.conj(v0) * t[i, 0, j, 1] * v1
                           + np.conj(v1) * t[i, 1, j, 0] * v0 + np.conj(v1) * t[i, 1, j, 1] * v1)
                    cond[i, j] = acc
                p += cond[i, i].real
            if p <= 1e-14:
                continue
            w = np.linalg.eigvalsh(cond / p)
            s = 0.0
            for x in w:
                if x > 1e-300:
                    s -= x * np.log(x)
            out[m] += p * s
    return out


def conditional_entropies_numba(rho, dA, directions):
    t = np.ascontiguousarray(rho, dtype=np.complex128).reshape(dA, 2, dA, 2)
    return _cond_entropy_loop(t, dA, np.ascontiguousarray(directions, dtype=np.complex128))


# --------------------------------------------------------------------------- #

if USE_NUMBA:
    partial_trace = partial_trace_numba
    partial_transpose = partial_transpose_numba
    embed_operator = embed_operator_numba
    conditional_entropies = conditional_entropies_numba
else:
    partial_trace = partial_trace_numpy
    partial_transpose = partial_transpose_numpy
    embed_operator = embed_operator_numpy
    conditional_entropies = conditional_entropies_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
