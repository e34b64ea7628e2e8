"""Paths along which a real functional ``alpha`` never increases, and grids of them.

Everything here is a discrete verdict on finite samples of paths and
homotopies; nothing is claimed about the continuum objects they sample.

Points are either density matrices (compared by trace distance, tolerance
``1e-9``) or hashable labels (compared by equality). A homotopy grid
``G[j][k] = F(s_j, t_k)`` has rows over the path parameter ``s`` and columns
over the deformation parameter ``t``: column 0 is ``f0``, the last column is
``f1``, and the first and last rows are pinned to the common end points.
"""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .correlation import von_neumann_entropy
from .matcore import trace_distance

SLACK = 1e-12
CONST_TOL = 1e-9
POINT_TOL = 1e-9


class EndpointMismatch(ValueError):
    pass


class BasepointMismatch(ValueError):
    pass


class BoundaryMismatch(ValueError):
    pass


# --------------------------------------------------------------------------- #
#                                 functionals                                 #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class AlphaFunctional:
    name: str
    evaluate: object

    def __call__(self, point):
        return float(self.evaluate(point))

    def values(self, points):
        return np.array([self(p) for p in points], dtype=float)


def energy(H):
    H = np.asarray(H, dtype=np.complex128)
    return AlphaFunctional("energy", lambda rho: np.real(np.trace(H @ np.asarray(rho))))


def entropy():
    return AlphaFunctional("entropy", von_neumann_entropy)


def purity():
    return AlphaFunctional("purity", lambda rho: np.real(np.vdot(np.asarray(rho), np.asarray(rho))))


def table(values, name="table"):
    """Look-up functional for labelled points."""
    values = {str(k): float(v) for k, v in dict(values).items()}
    return AlphaFunctional(name, lambda p: values[str(p)])


def identity():
    """For real-valued points: ``alpha(x) = x``."""
    return AlphaFunctional("value", float)


def points_equal(p, q, tol=POINT_TOL):
    if isinstance(p, np.ndarray) or isinstance(q, np.ndarray):
        P, Q = np.asarray(p), np.asarray(q)
        return P.shape == Q.shape and trace_distance(P, Q) <= tol
    if isinstance(p, (int, float, np.number)) and isinstance(q, (int, float, np.number)):
        return abs(p - q) <= tol
    return p == q


def non_increasing(values, slack=SLACK):
    """Index of the first uphill step (``v[k] > v[k-1] + slack``) or ``None``."""
    v = np.asarray(values, dtype=float)
    up = np.flatnonzero(np.diff(v) > slack)
    return None if up.size == 0 else int(up[0]) + 1


# --------------------------------------------------------------------------- #
#                                    paths                                    #
# --------------------------------------------------------------------------- #

class _EmptyPath:
    """The empty image; absorbing under every product."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EMPTY_PATH"

    def __bool__(self):
        return False

    def __len__(self):
        return 0


EMPTY_PATH = _EmptyPath()


@dataclass(frozen=True, eq=False)
class DiscretePath:
    points: tuple
    params: np.ndarray = None

    def __post_init__(self):
        pts = tuple(self.points)
        if not pts:
            raise ValueError("a path needs at least one point")
        t = np.linspace(0.0, 1.0, len(pts)) if self.params is None else np.asarray(self.params, dtype=float)
        if len(pts) == 1:
            t = np.array([0.0])
        elif t.shape != (len(pts),) or t[0] != 0.0 or t[-1] != 1.0 or np.any(np.diff(t) <= 0):
            raise ValueError("parameters must increase strictly from 0 to 1, one per point")
        t.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "params", t)

    def __len__(self):
        return len(self.points)

    @property
    def start(self):
        return self.points[0]

    @property
    def end(self):
        return self.points[-1]

    def reverse(self):
        return DiscretePath(self.points[::-1], 1.0 - self.params[::-1])

    def same_points(self, other, tol=POINT_TOL):
        return (isinstance(other, DiscretePath) and len(self) == len(other)
                and all(points_equal(p, q, tol) for p, q in zip(self.points, other.points)))


def as_path(p):
    if p is EMPTY_PATH or isinstance(p, DiscretePath):
        return p
    return DiscretePath(tuple(p))


def tilde_path(p, alpha, slack=SLACK):
    """``p`` itself when ``alpha`` is non-increasing along it, else EMPTY_PATH."""
    p = as_path(p)
    if p is EMPTY_PATH:
        return EMPTY_PATH
    return p if non_increasing(alpha.values(p.points), slack) is None else EMPTY_PATH


def concatenate(f, g, tol=POINT_TOL):
    """``f * g`` run at double speed, junction point kept once."""
    if not points_equal(f.end, g.start, tol):
        raise EndpointMismatch("end of the first path differs from the start of the second")
    if len(f) == 1:
        return g
    if len(g) == 1:
        return f
    pts = f.points + g.points[1:]
    t = np.concatenate([f.params / 2, 0.5 + g.params[1:] / 2])
    return DiscretePath(pts, t)


def path_product(f, g, alpha, slack=SLACK, tol=POINT_TOL):
    """Product of the tilde paths; EMPTY_PATH if either is empty or ``alpha`` rises."""
    f, g = tilde_path(f, alpha, slack), tilde_path(g, alpha, slack)
    if f is EMPTY_PATH or g is EMPTY_PATH:
        return EMPTY_PATH
    return tilde_path(concatenate(f, g, tol), alpha, slack)


def is_loop(f, basepoint=None, tol=POINT_TOL):
    f = as_path(f)
    x0 = f.start if basepoint is None else basepoint
    return points_equal(f.start, x0, tol) and points_equal(f.end, x0, tol)


def loop_product(f, g, alpha, basepoint=None, slack=SLACK, tol=POINT_TOL):
    f, g = as_path(f), as_path(g)
    for p in (f, g):
        if p is not EMPTY_PATH and not is_loop(p, basepoint if basepoint is not None else
                                               (f.start if f is not EMPTY_PATH else None), tol):
            raise BasepointMismatch("loops do not share the basepoint")
    return path_product(f, g, alpha, slack, tol)


def associative(f, g, h, alpha, slack=SLACK, tol=POINT_TOL):
    """``(f*g)*h`` and ``f*(g*h)`` visit the same points (they differ only by parameters)."""
    left = path_product(path_product(f, g, alpha, slack, tol), h, alpha, slack, tol)
    right = path_product(f, path_product(g, h, alpha, slack, tol), alpha, slack, tol)
    if left is EMPTY_PATH or right is EMPTY_PATH:
        return left is right
    return left.same_points(right, tol)


# --------------------------------------------------------------------------- #
#                                homotopy grids                               #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True, eq=False)
class HomotopyGrid:
    points: tuple            # points[j][k] = F(s_j, t_k)
    s: np.ndarray = None
    t: np.ndarray = None

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.points)
        if not rows or not rows[0]:
            raise ValueError("empty grid")
        if any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("grid rows have different lengths")
        J, K = len(rows), len(rows[0])
        s = np.linspace(0.0, 1.0, J) if self.s is None else np.asarray(self.s, dtype=float)
        t = np.linspace(0.0, 1.0, K) if self.t is None else np.asarray(self.t, dtype=float)
        for name, v, n in (("s", s, J), ("t", t, K)):
            if v.shape != (n,) or (n > 1 and (v[0] != 0 or v[-1] != 1 or np.any(np.diff(v) <= 0))):
                raise ValueError(f"{name} parameters must increase strictly from 0 to 1")
        object.__setattr__(self, "points", rows)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "t", t)

    @property
    def shape(self):
        return len(self.points), len(self.points[0])

    def column(self, k):
        """The path ``s -> F(s, t_k)``."""
        return DiscretePath(tuple(r[k] for r in self.points), self.s)

    @property
    def f0(self):
        return self.column(0)

    @property
    def f1(self):
        return self.column(-1)

    def alpha_values(self, alpha):
        return np.array([[alpha(p) for p in row] for row in self.points], dtype=float)

    def reverse(self):
        """``H(s, t) = F(s, 1 - t)``."""
        return HomotopyGrid(tuple(r[::-1] for r in self.points), self.s, 1.0 - self.t[::-1])


def stitch(F, H, tol=POINT_TOL):
    """``F(s, 2t)`` on the first half, ``H(s, 2t - 1)`` on the second."""
    if F.shape[0] != H.shape[0] or not np.array_equal(F.s, H.s):
        raise BoundaryMismatch("grids sample different s values")
    for a, b in zip(F.points, H.points):
        if not points_equal(a[-1], b[0], tol):
            raise BoundaryMismatch("last column of the first grid differs from the first column of the second")
    rows = tuple(a + b[1:] for a, b in zip(F.points, H.points))
    t = np.concatenate([F.t / 2, 0.5 + H.t[1:] / 2])
    return HomotopyGrid(rows, F.s, t)


def linear_grid(f0_values, f1_values, n_t):
    """Real-valued grid interpolating linearly in ``t`` between two profiles."""
    a, b = np.asarray(f0_values, float), np.asarray(f1_values, float)
    t = np.linspace(0.0, 1.0, n_t)
    rows = []
    for j in range(a.size):
        row = a[j] if a[j] == b[j] else (1 - t) * a[j] + t * b[j]    # constant rows stay bit-exact
        rows.append(tuple(float(x) for x in np.broadcast_to(row, t.shape)))
    return HomotopyGrid(rows, None, t)


def check_boundary(G, f0, f1, tol=POINT_TOL):
    """Raise :class:`BoundaryMismatch` unless the four boundary conditions hold."""
    f0, f1 = as_path(f0), as_path(f1)
    J, K = G.shape
    if len(f0) != J or len(f1) != J:
        raise BoundaryMismatch(f"paths have {len(f0)} and {len(f1)} points, grid has {J} rows")
    for j in range(J):
        if not points_equal(G.points[j][0], f0.points[j], tol):
            raise BoundaryMismatch(f"F(s_{j}, 0) differs from f0(s_{j})")
        if not points_equal(G.points[j][-1], f1.points[j], tol):
            raise BoundaryMismatch(f"F(s_{j}, 1) differs from f1(s_{j})")
    for k in range(K):
        if not points_equal(G.points[0][k], f0.start, tol):
            raise BoundaryMismatch(f"F(0, t_{k}) differs from the common start point")
        if not points_equal(G.points[-1][k], f1.end, tol):
            raise BoundaryMismatch(f"F(1, t_{k}) differs from the common end point")


@dataclass
class HomotopyVerdict:
    holds: bool
    witness: tuple = None     # (j, k): alpha(F(s_j, t_k)) > alpha(F(s_j, t_{k-1}))
    note: str = "discrete verdict"

    def __bool__(self):
        return self.holds


def is_alpha_homotopy(G, f0, f1, alpha, slack=SLACK, tol=POINT_TOL):
    """Every row ``t -> alpha(F(s_j, t))`` is non-increasing. Witness: first (j, k)."""
    check_boundary(G, f0, f1, tol)
    A = G.alpha_values(alpha)
    for j, row in enumerate(A):
        k = non_increasing(row, slack)
        if k is not None:
            return HomotopyVerdict(False, (j, k))
    return HomotopyVerdict(True)


class Equivalence(Enum):
    TWO_WAY = "TwoWay"
    ONE_WAY_ONLY = "OneWayOnly"
    NEITHER = "Neither"


@dataclass
class EquivalenceReport:
    verdict: Equivalence
    homotopy: HomotopyVerdict
    max_row_variation: float
    varying_row: int = None
    note: str = "discrete verdict"


def equivalence_check(G, f0, f1, alpha, slack=SLACK, const_tol=CONST_TOL, tol=POINT_TOL):
    """Two-way when the homotopy holds and every row has constant ``alpha``."""
    h = is_alpha_homotopy(G, f0, f1, alpha, slack, tol)
    A = G.alpha_values(alpha)
    var = A.max(axis=1) - A.min(axis=1)
    worst = float(var.max())
    varying = None if worst <= const_tol else int(np.flatnonzero(var > const_tol)[0])
    if not h.holds:
        verdict = Equivalence.NEITHER
    elif varying is None:
        verdict = Equivalence.TWO_WAY
    else:
        verdict = Equivalence.ONE_WAY_ONLY
    return EquivalenceReport(verdict, h, worst, varying)


# --------------------------------------------------------------------------- #
#                                     I/O                                     #
# --------------------------------------------------------------------------- #

@dataclass
class GridFile:
    grid: HomotopyGrid
    alpha: AlphaFunctional
    f0: DiscretePath = field(default=None)
    f1: DiscretePath = field(default=None)


def _point(ref, base, loader):
    if isinstance(ref, dict) and "entries" in ref:
        from .matcore import matrix_from_obj
        return matrix_from_obj(ref)
    if isinstance(ref, dict) and "file" in ref:
        return loader(base / ref["file"])
    if isinstance(ref, (int, float)) and not isinstance(ref, bool):
        return float(ref)
    return str(ref)


def grid_from_obj(obj, base=".", functional=None, loader=None):
    """Parse a grid file.

    ``points`` is a list of rows of point references: labels, numbers,
    inline matrix objects or ``{"file": path}`` state files. ``alpha``
    selects the functional (``table`` with ``values``, ``energy`` with a
    ``hamiltonian`` matrix, ``entropy``, ``purity`` or ``value``).
    """
    from pathlib import Path

    from .matcore import matrix_from_obj

    base = Path(base)
    rows = [[_point(r, base, loader) for r in row] for row in obj["points"]]
    G = HomotopyGrid(rows, obj.get("s"), obj.get("t"))
    spec = dict(obj.get("alpha", {}))
    name = functional or spec.get("kind", "table")
    if name == "table":
        alpha = table(spec["values"])
    elif name == "energy":
        alpha = energy(matrix_from_obj(spec["hamiltonian"]))
    elif name == "entropy":
        alpha = entropy()
    elif name == "purity":
        alpha = purity()
    elif name == "value":
        alpha = identity()
    else:
        raise ValueError(f"unknown alpha functional {name!r}")
    return GridFile(G, alpha, G.f0, G.f1)
