"""Two-unit copolymer chains: Hamiltonians, annealing and general ramps.

Sites are labelled ``1..N``. Site ``i`` carries unit ``A`` or ``B`` with local
dimension ``dim_A`` or ``dim_B``, an on-site Hamiltonian ``H^A``/``H^B`` and an
interaction operator ``Ht^A``/``Ht^B``. A link ``i -> i+1`` of unit types
``(C, D)`` contributes ``J^{CD}_i (Ht^C_i Ht^D_{i+1} + h.c.)``; the adjoint is
added literally, so a Hermitian product is counted twice. Chains are open
(site ``N`` has no successor) unless ``ring`` is set.

Annealing interpolates ``H(t) = f(t/T) H_polymer + (1 - f(t/T)) H_mix`` with
``H_mix = -sum_i X_i`` from the mixer ground state ``|+...+>``. Propagation is
piecewise constant: ``U_k = exp(-i H(t_k) dt)`` with ``t_k`` the left end of
step ``k``.
"""
import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .matcore import PAULI, ShapeMismatch, as_hermitian, as_matrix, dagger, embed_operator, matrix_from_obj
from .states import DensityOperator

MAX_DIM = 1024
TRACE_DRIFT_TOL = 1e-9
UNITARITY_TOL = 1e-10


class BoundaryConditionError(ValueError):
    pass


# --------------------------------------------------------------------------- #
#                                 chain spec                                  #
# --------------------------------------------------------------------------- #

def _per_site(value, N, name):
    a = np.asarray(value, dtype=float)
    if a.ndim == 0:
        return np.full(N, float(a))
    if a.shape != (N,):
        raise ShapeMismatch(f"{name} needs {N} per-site values, got shape {a.shape}")
    return a.copy()


@dataclass(frozen=True, eq=False)
class PolymerSpec:
    """A chain of ``A``/``B`` units.

    Couplings and fields accept a scalar or one value per site (index
    ``i - 1`` for site ``i``; the coupling value of site ``i`` is used for
    the link ``i -> i+1``).
    """

    units: str
    H_A: np.ndarray = field(default_factory=lambda: PAULI["Z"])
    H_B: np.ndarray = field(default_factory=lambda: PAULI["Z"])
    Ht_A: np.ndarray = field(default_factory=lambda: PAULI["Z"])
    Ht_B: np.ndarray = field(default_factory=lambda: PAULI["Z"])
    J_AA: object = 0.0
    J_AB: object = 0.0
    J_BA: object = 0.0
    J_BB: object = 0.0
    h_A: object = 0.0
    h_B: object = 0.0
    ring: bool = False

    def __post_init__(self):
        units = str(self.units).upper()
        if not units or set(units) - {"A", "B"}:
            raise ValueError(f"units must be a non-empty string over 'A' and 'B', got {self.units!r}")
        object.__setattr__(self, "units", units)
        for name in ("H_A", "H_B"):
            object.__setattr__(self, name, as_hermitian(as_matrix(getattr(self, name))))
        for name in ("Ht_A", "Ht_B"):
            object.__setattr__(self, name, as_matrix(getattr(self, name)))
        if self.H_A.shape != self.Ht_A.shape or self.H_B.shape != self.Ht_B.shape:
            raise ShapeMismatch("on-site and interaction operators of a unit must have the same shape")
        N = len(units)
        for name in ("J_AA", "J_AB", "J_BA", "J_BB", "h_A", "h_B"):
            object.__setattr__(self, name, _per_site(getattr(self, name), N, name))
        if self.total_dim > MAX_DIM:
            raise ValueError(f"total dimension {self.total_dim} exceeds {MAX_DIM}")

    @property
    def N(self):
        return len(self.units)

    @property
    def dims(self):
        return tuple(self.H_A.shape[0] if u == "A" else self.H_B.shape[0] for u in self.units)

    @property
    def total_dim(self):
        return int(np.prod(self.dims))

    def unit(self, i):
        """Unit type of 1-based site ``i``."""
        return self.units[i - 1]

    def onsite(self, i):
        return self.H_A if self.unit(i) == "A" else self.H_B

    def interaction(self, i):
        return self.Ht_A if self.unit(i) == "A" else self.Ht_B

    def field(self, i):
        return (self.h_A if self.unit(i) == "A" else self.h_B)[i - 1]

    def coupling(self, i):
        """Coupling on the link ``i -> i+1`` chosen by the two unit types."""
        j = self._succ(i)
        return getattr(self, f"J_{self.unit(i)}{self.unit(j)}")[i - 1]

    def _succ(self, i):
        return 1 if (self.ring and i == self.N) else i + 1

    def links(self):
        """Linked sites ``i`` (1-based); the link joins ``i`` and its successor."""
        last = self.N if (self.ring and self.N > 2) else self.N - 1
        return list(range(1, last + 1))


def alternating(N, start="A", **kw):
    other = "B" if start == "A" else "A"
    return PolymerSpec("".join(start if i % 2 == 0 else other for i in range(N)), **kw)


@dataclass(frozen=True)
class LinkSets:
    label_A: tuple
    label_B: tuple
    link_AA: tuple
    link_AB: tuple
    link_BB: tuple
    link_BA: tuple


def link_sets(spec):
    """Label and link sets (1-based). ``i`` is in ``link_CD`` when ``i`` is a ``C`` site
    whose successor is a ``D`` site."""
    sets = {k: [] for k in ("AA", "AB", "BB", "BA")}
    for i in spec.links():
        sets[spec.unit(i) + spec.unit(spec._succ(i))].append(i)
    label_A = tuple(i for i in range(1, spec.N + 1) if spec.unit(i) == "A")
    label_B = tuple(i for i in range(1, spec.N + 1) if spec.unit(i) == "B")
    return LinkSets(label_A, label_B, tuple(sets["AA"]), tuple(sets["AB"]), tuple(sets["BB"]), tuple(sets["BA"]))


# --------------------------------------------------------------------------- #
#                                 Hamiltonians                                #
# --------------------------------------------------------------------------- #

def _site_op(spec, op, i):
    return embed_operator(op, spec.dims, [i - 1])


def _link_op(spec, i, left, right):
    j = spec._succ(i)
    if j > i:
        return embed_operator(np.kron(left, right), spec.dims, [i - 1, j - 1])
    return _site_op(spec, left, i) @ _site_op(spec, right, j)


def link_term(spec, i):
    """``Ht_i Ht_{i+1} + h.c.`` without the coupling."""
    T = _link_op(spec, i, spec.interaction(i), spec.interaction(spec._succ(i)))
    return T + dagger(T)


def field_term(spec, i, op=None):
    return _site_op(spec, spec.onsite(i) if op is None else op, i)


def build_h_polymer(spec):
    D = spec.total_dim
    H = np.zeros((D, D), dtype=np.complex128)
    for i in spec.links():
        J = spec.coupling(i)
        if J:
            H += J * link_term(spec, i)
    for i in range(1, spec.N + 1):
        h = spec.field(i)
        if h:
            H += h * field_term(spec, i)
    return H


def build_h_mixer(N_or_spec):
    """``-sum_i X_i`` on qubit sites."""
    if isinstance(N_or_spec, PolymerSpec):
        if any(d != 2 for d in N_or_spec.dims):
            raise ValueError("the X mixer needs qubit sites")
        N = N_or_spec.N
    else:
        N = int(N_or_spec)
    dims = (2,) * N
    H = np.zeros((2 ** N, 2 ** N), dtype=np.complex128)
    for i in range(N):
        H -= embed_operator(PAULI["X"], dims, [i])
    return H


def build_h_noninteracting(spec):
    """``sum_i H^{u(i)}_i``."""
    return sum(field_term(spec, i) for i in range(1, spec.N + 1))


def ground_space(H, tol=1e-9):
    """Energy and orthonormal basis (columns) of the lowest eigenspace."""
    w, V = np.linalg.eigh(H)
    mask = w <= w[0] + tol
    return float(w[0]), V[:, mask]


def ground_fidelity(psi, H, tol=1e-9):
    """Weight of ``psi`` in the ground eigenspace of ``H`` (degeneracy-safe)."""
    _, G = ground_space(H, tol)
    return float(np.sum(np.abs(dagger(G) @ psi) ** 2))


# --------------------------------------------------------------------------- #
#                                   schedules                                 #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True, eq=False)
class Schedule:
    """``f: [0, 1] -> [0, 1]`` from a named family.

    ``linear``, ``smoothstep`` and ``table`` (piecewise linear through the
    points, checked for monotonicity and the end values) satisfy
    ``f(0) = 0`` and ``f(1) = 1``. ``frozen`` (``f = 0``) is a diagnostic
    that never leaves the mixer.
    """

    family: str = "linear"
    table: tuple = None

    def __post_init__(self):
        if self.family not in ("linear", "smoothstep", "table", "frozen"):
            raise ValueError(f"unknown schedule family {self.family!r}")
        if self.family == "table":
            if self.table is None:
                raise ValueError("table schedule needs points")
            pts = np.asarray(self.table, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
                raise ValueError("table must be a list of (s, f) pairs")
            s, f = pts[:, 0], pts[:, 1]
            if s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
                raise ValueError("table s values must increase strictly from 0 to 1")
            if f[0] != 0.0 or f[-1] != 1.0:
                raise ValueError("table must start at f=0 and end at f=1")
            if np.any(np.diff(f) < 0):
                raise ValueError("table f values must be non-decreasing")
            object.__setattr__(self, "table", tuple(map(tuple, pts)))

    @property
    def diagnostic(self):
        return self.family == "frozen"

    def __call__(self, s):
        s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
        if self.family == "linear":
            out = s
        elif self.family == "smoothstep":
            out = s * s * (3 - 2 * s)
        elif self.family == "frozen":
            out = np.zeros_like(s)
        else:
            pts = np.asarray(self.table)
            out = np.interp(s, pts[:, 0], pts[:, 1])
        return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------- #
#                                 trajectories                                #
# --------------------------------------------------------------------------- #

def _entanglement_entropies(psi, dims):
    """Entropy of the left block ``1..k`` for every cut ``k = 1..N-1``."""
    out = np.empty(len(dims) - 1)
    left = 1
    total = psi.size
    for k in range(len(dims) - 1):
        left *= dims[k]
        s = np.linalg.svd(psi.reshape(left, total // left), compute_uv=False)
        p = s * s
        p = p[p > 1e-300]
        out[k] = max(float(-np.sum(p * np.log(p))), 0.0)
    return out


def _site_marginals(psi, dims):
    out = []
    t = psi.reshape(dims)
    n = len(dims)
    for i in range(n):
        m = np.moveaxis(t, i, 0).reshape(dims[i], -1)
        out.append(m @ dagger(m))
    return out


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    dims: tuple
    kets: list = field(repr=False)          # state vectors at recorded times
    energy: np.ndarray = None
    entanglement: np.ndarray = None         # (n_times, N - 1), natural log
    marginals: list = field(default=None, repr=False)
    trace_drift: float = 0.0
    unitarity_defect: float = 0.0
    final_hamiltonian: np.ndarray = field(default=None, repr=False)
    cover: tuple = None
    metadata: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.kets[-1]

    def state(self, k=-1):
        psi = self.kets[k]
        M = np.outer(psi, np.conj(psi))
        return DensityOperator(0.5 * (M + dagger(M)))

    def local_state(self, k, U):
        """Reduced state at recorded step ``k`` on the cover member ``U`` (1-based sites)."""
        U = tuple(sorted(int(i) for i in np.atleast_1d(U)))
        cover = self.cover or tuple((i,) for i in range(1, len(self.dims) + 1))
        if U not in cover:
            raise ValueError(f"{U} is not a member of the cover {cover}")
        keep = [i - 1 for i in U]
        t = self.kets[k].reshape(self.dims)
        rest = [i for i in range(len(self.dims)) if i not in keep]
        m = np.transpose(t, keep + rest).reshape(int(np.prod([self.dims[i] for i in keep])), -1)
        M = m @ dagger(m)
        return DensityOperator(0.5 * (M + dagger(M)))

    def fidelity(self, H=None):
        H = self.final_hamiltonian if H is None else H
        return ground_fidelity(self.final, H)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n_cuts = self.entanglement.shape[1] if self.entanglement is not None else 0
        w.writerow(["t", "energy"] + [f"ee_cut_{k + 1}" for k in range(n_cuts)])
        for j, t in enumerate(self.times):
            row = [repr(float(t)), repr(float(self.energy[j]))]
            row += [repr(float(x) + 0.0) for x in self.entanglement[j]]  # no negative zeros
            w.writerow(row)
        return buf.getvalue()


def _propagate(H_of, psi0, times, dims, record_every=1):
    """Shared engine: ``H_of(t)`` gives the Hamiltonian held on ``[t, t + dt)``."""
    psi = psi0.astype(np.complex128).copy()
    D = psi.size
    I = np.eye(D)
    kets, rec_t, energy, ee, marg = [], [], [], [], []
    drift = unit_def = 0.0

    def record(t, H):
        e = np.vdot(psi, H @ psi)
        if abs(e.imag) > 1e-10 * max(1.0, abs(e.real)):
            raise ValueError(f"energy has imaginary part {e.imag:.3e}")
        rec_t.append(t)
        kets.append(psi.copy())
        energy.append(float(e.real))
        ee.append(_entanglement_entropies(psi, dims) if len(dims) > 1 else np.zeros(0))
        marg.append(_site_marginals(psi, dims))

    n_steps = len(times) - 1
    H = H_of(times[0])
    record(times[0], H)
    for k in range(n_steps):
        dt = times[k + 1] - times[k]
        w, V = np.linalg.eigh(H)
        U = (V * np.exp(-1j * w * dt)) @ dagger(V)
        unit_def = max(unit_def, float(np.max(np.abs(U @ dagger(U) - I))))
        psi = U @ psi
        drift = max(drift, abs(float(np.vdot(psi, psi).real) - 1.0))
        H = H_of(times[k + 1])
        if (k + 1) % record_every == 0 or k + 1 == n_steps:
            record(times[k + 1], H)
    if drift > TRACE_DRIFT_TOL:
        raise RuntimeError(f"trace drift {drift:.3e} exceeds {TRACE_DRIFT_TOL:.0e}")
    if unit_def > UNITARITY_TOL:
        raise RuntimeError(f"step unitarity defect {unit_def:.3e} exceeds {UNITARITY_TOL:.0e}")
    return rec_t, kets, np.array(energy), np.array(ee), marg, drift, unit_def


def plus_state(N):
    v = np.ones(2 ** N, dtype=np.complex128)
    return v / np.linalg.norm(v)


def anneal(spec, schedule=None, T=10.0, n_steps=1000, record_every=1):
    """Anneal from ``|+...+>`` under ``f(t/T) H_polymer + (1 - f(t/T)) H_mix``."""
    schedule = schedule or Schedule("linear")
    Hp = build_h_polymer(spec)
    H0 = build_h_mixer(spec)
    psi0 = plus_state(spec.N)
    if T == 0 or n_steps == 0:
        times = np.array([0.0])
    else:
        times = np.linspace(0.0, float(T), int(n_steps) + 1)

    def H_of(t):
        f = schedule(t / T) if T else 0.0
        return f * Hp + (1 - f) * H0

    rec_t, kets, energy, ee, marg, drift, udef = _propagate(H_of, psi0, times, spec.dims, record_every)
    f_end = schedule(1.0) if T else 0.0
    return Trajectory(np.array(rec_t), spec.dims, kets, energy, ee, marg, drift, udef,
                      f_end * Hp + (1 - f_end) * H0,
                      metadata={"kind": "anneal", "schedule": schedule.family, "T": float(T),
                                "n_steps": int(n_steps), "units": spec.units})


# --------------------------------------------------------------------------- #
#                               general evolution                             #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True, eq=False)
class StepTables:
    """Piecewise-constant ``J_i(s)`` and ``h_i(s)`` on ``s in [0, 1]``.

    Row ``k`` holds on ``[s_k, s_{k+1})``; the last row holds at ``s = 1``.
    ``J`` has one column per link, ``h`` one per site.
    """

    s: np.ndarray
    J: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        J = np.atleast_2d(np.asarray(self.J, dtype=float))
        h = np.atleast_2d(np.asarray(self.h, dtype=float))
        if s.ndim != 1 or s[0] != 0.0 or np.any(np.diff(s) <= 0) or s[-1] > 1.0:
            raise ValueError("table breakpoints must increase strictly from 0 within [0, 1]")
        if J.shape[0] != s.size or h.shape[0] != s.size:
            raise ShapeMismatch("tables need one row per breakpoint")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "h", h)

    def row(self, s):
        return int(np.searchsorted(self.s, s, side="right") - 1)

    def at(self, s):
        k = self.row(min(max(s, 0.0), 1.0))
        return self.J[k], self.h[k]


def target_tables(spec):
    """Couplings and fields that realise ``spec`` exactly."""
    J = np.array([spec.coupling(i) for i in spec.links()])
    h = np.array([spec.field(i) for i in range(1, spec.N + 1)])
    return J, h


def ramp_tables(spec, n_points=10):
    """Couplings switched on in ``n_points`` equal steps; fields held at their unit values."""
    J1, h1 = target_tables(spec)
    s = np.linspace(0.0, 1.0, n_points + 1)
    frac = s / s[-1]
    return StepTables(s, np.outer(frac, J1), np.tile(h1, (s.size, 1)))


def _local_ground(H):
    _, V = np.linalg.eigh(H)
    v = V[:, 0]
    k = int(np.argmax(np.abs(v) > 1e-12))
    return v * (np.abs(v[k]) / v[k])


def evolve_general(spec, tables, T=10.0, n_steps=1000, record_every=1, check_target=True, atol=1e-12):
    """Evolve under ``sum_i J_i(t) (Ht_i Ht_{i+1} + h.c.) + sum_i h_i(t) H^{u(i)}_i``.

    Requires ``J_i(0) = 0`` and ``h_i(0)`` equal to the unit field of site
    ``i``; the start state is the product of local ground states of
    ``h_i(0) H^{u(i)}``. ``metadata["target_reached"]`` records whether the
    final row realises ``spec``.
    """
    links = spec.links()
    if tables.J.shape[1] != len(links) or tables.h.shape[1] != spec.N:
        raise ShapeMismatch(f"tables need {len(links)} link columns and {spec.N} site columns")
    J0, h0 = tables.J[0], tables.h[0]
    J1, h1 = target_tables(spec)
    if np.any(np.abs(J0) > atol):
        raise BoundaryConditionError(f"J_i(0) must vanish; got {J0.tolist()}")
    if np.any(np.abs(h0 - h1) > atol):
        raise BoundaryConditionError(f"h_i(0) must equal the unit fields {h1.tolist()}; got {h0.tolist()}")
    links_ops = [link_term(spec, i) for i in links]
    field_ops = [field_term(spec, i) for i in range(1, spec.N + 1)]
    psi0 = np.ones(1, dtype=np.complex128)
    for i in range(1, spec.N + 1):
        psi0 = np.kron(psi0, _local_ground(h0[i - 1] * spec.onsite(i) if h0[i - 1] else spec.onsite(i)))
    times = np.array([0.0]) if T == 0 or n_steps == 0 else np.linspace(0.0, float(T), int(n_steps) + 1)

    def H_of(t):
        J, h = tables.at(t / T if T else 0.0)
        H = sum(c * op for c, op in zip(J, links_ops) if c) if np.any(J) else 0
        H = H + sum(c * op for c, op in zip(h, field_ops) if c)
        if np.isscalar(H):
            H = np.zeros((spec.total_dim,) * 2, dtype=np.complex128)
        return H

    rec_t, kets, energy, ee, marg, drift, udef = _propagate(H_of, psi0, times, spec.dims, record_every)
    Jf, hf = tables.at(1.0)
    reached = bool(np.allclose(Jf, J1, atol=atol, rtol=0) and np.allclose(hf, h1, atol=atol, rtol=0))
    if check_target and not reached:
        meta_note = "final couplings do not realise the declared polymer"
    else:
        meta_note = None
    return Trajectory(np.array(rec_t), spec.dims, kets, energy, ee, marg, drift, udef, H_of(times[-1]),
                      metadata={"kind": "general", "T": float(T), "n_steps": int(n_steps),
                                "units": spec.units, "target_reached": reached, "note": meta_note})


# --------------------------------------------------------------------------- #
#                                    config                                   #
# --------------------------------------------------------------------------- #

def _load_tomllib():
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    return tomllib


def _operator(value):
    if isinstance(value, str):
        try:
            return PAULI[value.upper()]
        except KeyError:
            raise ValueError(f"unknown operator name {value!r}; use I, X, Y, Z or a matrix") from None
    if isinstance(value, dict):
        return matrix_from_obj(value)
    a = np.asarray(value)
    if a.ndim == 3 and a.shape[-1] == 2:  # [[ [re, im], ... ], ...]
        return a[..., 0] + 1j * a[..., 1]
    return a.astype(np.complex128)


@dataclass
class PolymerConfig:
    spec: PolymerSpec
    schedule: Schedule
    run: dict
    tables: StepTables = None


def parse_config(obj):
    """Build a :class:`PolymerConfig` from the parsed TOML/JSON mapping."""
    units = obj.get("units", {})
    seq = units.get("sequence") if isinstance(units, dict) else units
    if seq is None:
        raise ValueError("[units] needs a 'sequence' such as \"ABAB\"")
    ops = {k: _operator(v) for k, v in obj.get("local_ops", {}).items()}
    c = dict(obj.get("couplings", {}))
    spec = PolymerSpec(seq, ring=bool(c.pop("ring", False)), **ops, **c)
    sch = obj.get("schedule", {})
    schedule = Schedule(sch.get("family", "linear"), sch.get("table"))
    run = {"T": 10.0, "n_steps": 1000, "record_every": 1, "seed": 0}
    run.update(obj.get("run", {}))
    tables = None
    ev = obj.get("evolve")
    if ev:
        if "ramp_points" in ev:
            tables = ramp_tables(spec, int(ev["ramp_points"]))
        else:
            tables = StepTables(ev["s"], ev["J"], ev["h"])
    return PolymerConfig(spec, schedule, run, tables)


def load_config(path):
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return parse_config(json.loads(text))
    return parse_config(_load_tomllib().loads(text))
