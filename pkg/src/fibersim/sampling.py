"""Random matrices and states. Every sampler takes an explicit ``numpy`` Generator."""
import numpy as np

from .matcore import dagger, tensor
from .states import DensityOperator


def rng_from(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def ginibre(rng, rows, cols=None):
    cols = rows if cols is None else cols
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def random_unitary(d, rng):
    """Haar-distributed unitary (QR of a Ginibre matrix with the phase fix)."""
    Q, R = np.linalg.qr(ginibre(rng, d))
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph


def random_ket(d, rng):
    v = ginibre(rng, d, 1).ravel()
    return v / np.linalg.norm(v)


def random_pure(d, rng):
    v = random_ket(d, rng)
    return DensityOperator(np.outer(v, np.conj(v)))


def random_density(d, rng, rank=None):
    """Hilbert-Schmidt random mixed state (induced measure for ``rank < d``)."""
    G = ginibre(rng, d, d if rank is None else rank)
    M = G @ dagger(G)
    return DensityOperator(M / np.real(np.trace(M)))


def random_hermitian(d, rng, scale=1.0):
    G = ginibre(rng, d)
    return scale * (G + dagger(G)) / 2


def random_product_pure(dims, rng):
    return DensityOperator(tensor(*[random_pure(d, rng).matrix for d in dims]))


def random_separable(dims, rng, n_terms=4):
    """Convex mixture of ``n_terms`` random pure product states."""
    w = rng.dirichlet(np.ones(n_terms))
    M = sum(wk * random_product_pure(dims, rng).matrix for wk in w)
    return DensityOperator(M / np.real(np.trace(M)))


def random_local_unitary(dims, rng):
    return tensor(*[random_unitary(d, rng) for d in dims])
