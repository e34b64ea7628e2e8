"""Compare the numba and pure-numpy flavours of the index-heavy kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--qubits N]

Each kernel is first called once (JIT warmup, not timed), checked for
agreement between the two flavours, and then timed with ``timeit``.
"""
import argparse
import timeit

import numpy as np

from fibersim import kernels
from fibersim.sampling import random_density


def cases(n_qubits, rng):
    dims = (2,) * n_qubits
    rho = random_density(2 ** n_qubits, rng).matrix
    half = tuple(range(n_qubits // 2))
    op = rho[: 4, : 4].copy()
    rho2 = random_density(8, rng).matrix
    dirs = rng.normal(size=(2000, 2)) + 1j * rng.normal(size=(2000, 2))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return {
        "partial_trace": ((rho, dims, half), {}),
        "partial_transpose": ((rho, dims, half), {}),
        "embed_operator": ((op, dims, (0, n_qubits - 1)), {}),
        "conditional_entropies": ((rho2, 4, dirs), {}),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--qubits", type=int, default=8)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}{'max diff':>12}")
    for name, (a, kw) in cases(args.qubits, rng).items():
        f_np = getattr(kernels, f"{name}_numpy")
        f_nb = getattr(kernels, f"{name}_numba")
        diff = float(np.max(np.abs(f_np(*a, **kw) - f_nb(*a, **kw))))   # also warms up the JIT
        t_np = min(timeit.repeat(lambda: f_np(*a, **kw), number=1, repeat=args.repeat)) * 1e3
        t_nb = min(timeit.repeat(lambda: f_nb(*a, **kw), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<24}{t_np:>12.3f}{t_nb:>12.3f}{t_np / t_nb:>10.2f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
