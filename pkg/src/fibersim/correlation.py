"""Correlation functionals on bipartite states (natural logarithms throughout)."""
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .matcore import ShapeMismatch, check_dims, dagger, partial_trace, partial_transpose, tensor
from .sampling import rng_from

PT_TOL = 1e-10
SUPPORT_TOL = 1e-12


class Unsupported(ValueError):
    pass


@dataclass(frozen=True)
class Bipartition:
    """Factors ``subset`` (side A) versus the rest (side A^c) of ``dims``."""

    dims: tuple
    subset: tuple

    def __post_init__(self):
        dims = check_dims(self.dims)
        subset = tuple(sorted(set(int(i) for i in self.subset)))
        if not subset or len(subset) == len(dims):
            raise ValueError("side A must be a non-empty proper subset of the factors")
        if any(i < 0 or i >= len(dims) for i in subset):
            raise ValueError(f"factor indices {subset} out of range")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "subset", subset)

    @property
    def complement(self):
        return tuple(i for i in range(len(self.dims)) if i not in self.subset)

    @property
    def dim_a(self):
        return int(np.prod([self.dims[i] for i in self.subset]))

    @property
    def dim_b(self):
        return int(np.prod([self.dims[i] for i in self.complement]))

    @property
    def total(self):
        return int(np.prod(self.dims))

    def check(self, rho):
        if np.shape(rho)[-1] != self.total:
            raise ShapeMismatch(f"state of dimension {np.shape(rho)[-1]} does not fit dims {self.dims}")


def cut(dims, subset=(0,)):
    return Bipartition(tuple(dims), tuple(subset))


def qubit_cut(n=2, subset=(0,)):
    return Bipartition((2,) * n, tuple(subset))


def _mat(rho):
    return np.asarray(rho, dtype=np.complex128)


def _entropy(w):
    w = w[w > 1e-300]
    return float(-np.sum(w * np.log(w)))


def von_neumann_entropy(rho):
    """``-Tr rho log rho`` with ``0 log 0 = 0``."""
    w = np.clip(np.linalg.eigvalsh(_mat(rho)), 0.0, None)
    return max(_entropy(w), 0.0)


def relative_entropy(rho, sigma, support_tol=SUPPORT_TOL):
    """``Tr rho (log rho - log sigma)``; ``math.inf`` when supp(rho) is not inside supp(sigma)."""
    R, S = _mat(rho), _mat(sigma)
    mu, W = np.linalg.eigh(S)
    diag = np.real(np.einsum("ji,jk,ki->i", np.conj(W), R, W))
    outside = mu <= support_tol
    if np.any(diag[outside] > support_tol):
        return math.inf
    w = np.clip(np.linalg.eigvalsh(R), 0.0, None)
    value = -_entropy(w) - float(np.sum(diag[~outside] * np.log(mu[~outside])))
    return max(value, 0.0) if value > -1e-12 else value


def _pt_eigs(rho, B):
    return np.linalg.eigvalsh(partial_transpose(_mat(rho), B.dims, B.subset))


def negativity(rho, B):
    """``(||rho^{T_A}||_1 - 1) / 2``.

    Exactly 0 when the smallest partial-transpose eigenvalue is above
    ``-PT_TOL``, the threshold :func:`is_separable_ppt` uses, so the two agree.
    """
    B.check(rho)
    w = _pt_eigs(rho, B)
    if w[0] >= -PT_TOL:
        return 0.0
    return float(-np.sum(w[w < 0]))


def log_negativity(rho, B):
    B.check(rho)
    w = _pt_eigs(rho, B)
    if w[0] >= -PT_TOL:
        return 0.0
    return max(math.log(float(np.sum(np.abs(w)))), 0.0)


def batch_negativity(stack, B):
    """Negativity of every state in a ``(n, D, D)`` stack."""
    w = np.linalg.eigvalsh(kernels.partial_transpose(np.ascontiguousarray(stack, dtype=np.complex128),
                                                     B.dims, list(B.subset)))
    n = -np.sum(np.where(w < 0, w, 0.0), axis=-1)
    return np.where(w[..., 0] >= -PT_TOL, 0.0, n)


class PPTVerdict(Enum):
    SEPARABLE = "separable"
    ENTANGLED = "entangled"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class PPTResult:
    verdict: PPTVerdict
    min_pt_eig: float

    def __eq__(self, other):
        if isinstance(other, PPTVerdict):
            return self.verdict is other
        return NotImplemented

    __hash__ = None


def is_separable_ppt(rho, B, tol=PT_TOL):
    """PPT test, exact (Peres-Horodecki) for 2x2 and 2x3 cuts."""
    B.check(rho)
    lam = float(_pt_eigs(rho, B)[0])
    if lam < -tol:
        return PPTResult(PPTVerdict.ENTANGLED, lam)
    if sorted((B.dim_a, B.dim_b)) in ([2, 2], [2, 3]):
        return PPTResult(PPTVerdict.SEPARABLE, lam)
    return PPTResult(PPTVerdict.INCONCLUSIVE, lam)


def marginals(rho, B):
    R = _mat(rho)
    return partial_trace(R, B.dims, B.subset), partial_trace(R, B.dims, B.complement)


def mutual_information(rho, B):
    """``S(rho_A) + S(rho_{A^c}) - S(rho)``."""
    B.check(rho)
    ra, rb = marginals(rho, B)
    value = von_neumann_entropy(ra) + von_neumann_entropy(rb) - von_neumann_entropy(rho)
    return max(value, 0.0)


# --------------------------------------------------------------------------- #
#                       relative entropy of entanglement                      #
# --------------------------------------------------------------------------- #

@dataclass
class REEResult:
    value: float
    sigma: np.ndarray = field(repr=False)
    exactness: str = "upper_bound"


def _unpack(x, K, da, db):
    n = 2 * (da + db) + 1
    members = x.reshape(K, n)
    logits = members[:, 0]
    p = np.exp(logits - logits.max())
    p /= p.sum()
    va = members[:, 1:1 + da] + 1j * members[:, 1 + da:1 + 2 * da]
    vb = members[:, 1 + 2 * da:1 + 2 * da + db] + 1j * members[:, 1 + 2 * da + db:]
    va = va / np.linalg.norm(va, axis=1, keepdims=True)
    vb = vb / np.linalg.norm(vb, axis=1, keepdims=True)
    return p, va, vb


def _mixture(p, va, vb):
    prods = np.einsum("ki,kj->kij", va, vb).reshape(len(p), -1)
    return np.einsum("k,ki,kj->ij", p, prods, np.conj(prods))


def _to_ab_order(rho, B):
    """Permute factors so side A comes first; returns a (dA dB)x(dA dB) matrix."""
    order = list(B.subset) + list(B.complement)
    n = len(B.dims)
    t = _mat(rho).reshape(B.dims * 2)
    t = t.transpose(order + [n + i for i in order])
    return t.reshape(B.total, B.total)


def ree_estimate(rho, B, ensemble_size=None, iterations=2, seed=0, n_starts=3):
    """Upper bound on the relative entropy of entanglement.

    Candidates are separable mixtures ``sum_k p_k |a_k b_k><a_k b_k|``.
    Starting points: the state dephased in the local eigenbases of its
    marginals plus ``n_starts`` random ensembles. The two best are optimised
    jointly with L-BFGS, then polished by ``iterations`` sweeps of block
    coordinate descent (one ensemble member per block). The product of the
    marginals is also tried. Deterministic for a fixed ``seed``.
    """
    B.check(rho)
    R = _to_ab_order(rho, B)
    da, db = B.dim_a, B.dim_b
    K = ensemble_size or min((da * db) ** 2, 16)
    rng = rng_from(seed)
    n = 2 * (da + db) + 1

    def objective(x):
        v = relative_entropy(R, _mixture(*_unpack(x, K, da, db)))
        return 50.0 if not np.isfinite(v) else v

    ra = partial_trace(R, (da, db), [0])
    rb = partial_trace(R, (da, db), [1])
    _, Ua = np.linalg.eigh(ra)
    _, Ub = np.linalg.eigh(rb)
    pairs = [(i, j) for i in range(da) for j in range(db)]
    x = rng.standard_normal((K, n)) * 0.1
    for k in range(K):
        i, j = pairs[k % len(pairs)]
        va, vb = Ua[:, i], Ub[:, j]
        w = np.real(np.conj(np.kron(va, vb)) @ R @ np.kron(va, vb)) if k < len(pairs) else 1e-6
        x[k, 0] = np.log(max(w, 1e-9))
        x[k, 1:1 + da], x[k, 1 + da:1 + 2 * da] = va.real, va.imag
        x[k, 1 + 2 * da:1 + 2 * da + db], x[k, 1 + 2 * da + db:] = vb.real, vb.imag
    starts = [x.ravel()] + [rng.standard_normal(K * n) for _ in range(n_starts)]
    starts.sort(key=objective)
    runs = [minimize(objective, x0, method="L-BFGS-B", options={"maxiter": 2000}) for x0 in starts[:2]]
    run = min(runs, key=lambda r: r.fun)
    x, best = run.x.copy(), float(run.fun)
    for _ in range(iterations):
        prev = best
        for k in range(K):
            sl = slice(k * n, (k + 1) * n)

            def block_obj(y, k_sl=sl):
                z = x.copy()
                z[k_sl] = y
                return objective(z)

            res = minimize(block_obj, x[sl], method="L-BFGS-B", options={"maxiter": 50})
            if res.fun < best:
                x[sl] = res.x
                best = float(res.fun)
        if prev - best < 1e-12:
            break
    sigma = _mixture(*_unpack(x, K, da, db))
    prod = np.kron(ra, rb)
    prod_val = relative_entropy(R, prod)
    if prod_val < best:
        best, sigma = prod_val, prod
    return REEResult(max(best, 0.0), sigma)


def ree_lower_bound(rho, B):
    """Pinsker-type lower bound ``N^2 / (2 d^2)`` from the negativity ``N``.

    For PPT ``sigma``: ``||rho - sigma||_1 >= ||(rho - sigma)^T_A||_1 / d >= N / d``
    with ``d = min(dA, dB)``, and ``S(rho||sigma) >= ||rho - sigma||_1^2 / 2``.
    """
    N = negativity(rho, B)
    d = min(B.dim_a, B.dim_b)
    return N * N / (2 * d * d)


# --------------------------------------------------------------------------- #
#                                   discord                                   #
# --------------------------------------------------------------------------- #

def _bloch_ket(theta, phi):
    return np.stack([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], axis=-1)


@dataclass
class DiscordResult:
    value: float
    raw: float
    mutual_information: float
    classical_correlation: float
    theta: float
    phi: float
    measured: tuple


def discord(rho, B, measurement_grid=(24, 48), refine_steps=200, return_details=False):
    """Quantum discord with the projective measurement on side A^c.

    ``D = I - J`` where ``J = S(rho_A) - min_n sum_pm p_pm S(rho_A|pm)`` over
    rank-one projective measurements of the (single-qubit) side A^c, found on
    a ``(n_theta, n_phi)`` Bloch-sphere grid and refined by Nelder-Mead.
    """
    B.check(rho)
    if B.dim_b != 2:
        raise Unsupported("discord needs a single-qubit measured side (A^c)")
    order = list(B.subset) + list(B.complement)
    n = len(B.dims)
    R = _mat(rho).reshape(B.dims * 2).transpose(order + [n + i for i in order]).reshape(B.total, B.total)
    da = B.dim_a
    ra = partial_trace(R, (da, 2), [0])
    mi = mutual_information(R, Bipartition((da, 2), (0,)))
    n_t, n_p = measurement_grid
    thetas = np.linspace(0.0, np.pi, n_t)
    phis = np.linspace(0.0, 2 * np.pi, n_p, endpoint=False)
    T, P = np.meshgrid(thetas, phis, indexing="ij")
    cond = kernels.conditional_entropies(R, da, _bloch_ket(T.ravel(), P.ravel()))
    k = int(np.argmin(cond))
    x0 = np.array([T.ravel()[k], P.ravel()[k]])
    best = float(cond[k])

    def f(x):
        return float(kernels.conditional_entropies(R, da, _bloch_ket(np.array([x[0]]), np.array([x[1]])))[0])

    if refine_steps:
        res = minimize(f, x0, method="Nelder-Mead",
                       options={"maxiter": refine_steps, "xatol": 1e-10, "fatol": 1e-14})
        if res.fun < best:
            best, x0 = float(res.fun), res.x
    J = von_neumann_entropy(ra) - best
    raw = mi - J
    value = max(raw, 0.0)
    if return_details:
        return DiscordResult(value, raw, mi, J, float(x0[0]), float(x0[1]), B.complement)
    return value


# --------------------------------------------------------------------------- #
#                             functional registry                             #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class CorrelationFunctional:
    """A non-negative functional ``f(rho, cut)``.

    ``local_unitary_invariant`` marks functionals unchanged by ``u (x) v``
    conjugation; the semiclassical certificate relies on it.
    """

    name: str
    evaluate: object
    exactness: str = "closed_form"
    local_unitary_invariant: bool = True
    batch: object = None

    def __call__(self, rho, B):
        return self.evaluate(_mat(rho), B)


FUNCTIONALS = {
    "negativity": CorrelationFunctional("negativity", negativity, batch=batch_negativity),
    "log_negativity": CorrelationFunctional("log_negativity", log_negativity),
    "mutual_information": CorrelationFunctional("mutual_information", mutual_information),
    "discord": CorrelationFunctional("discord", lambda r, b: discord(r, b), exactness="optimized"),
    "ree": CorrelationFunctional("ree", lambda r, b: ree_estimate(r, b).value, exactness="upper_bound"),
}


def get_functional(name):
    if isinstance(name, CorrelationFunctional):
        return name
    try:
        return FUNCTIONALS[name]
    except KeyError:
        raise KeyError(f"unknown functional {name!r}; choose from {sorted(FUNCTIONALS)}") from None


def local_unitary(*factors):
    return tensor(*factors)


def apply_local(rho, U):
    R = _mat(rho)
    return U @ R @ dagger(U)
