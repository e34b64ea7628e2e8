"""Operators that never increase a correlation functional, and classical states.

Membership of an operator ``a`` asks that ``f(a rho a* / Tr) <= f(rho)`` for
every state, which no finite computation settles. Verdicts are therefore
one of three kinds:

``certified``
    ``a`` is a nonzero multiple of a local unitary ``u (x) v`` across the cut
    and ``f`` is local-unitary invariant, so equality holds for all states.
``probe``
    no violation on any probe state; a statistical statement only.
``nonmember``
    a concrete witness state whose ``f`` value increases by more than ``tol``.
"""
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .algebra import GateSet, in_check_A, universality_probe
from .correlation import Bipartition, get_functional
from .matcore import as_matrix, dagger, max_norm, tensor
from .sampling import random_density, random_ket, random_product_pure, rng_from
from .states import MINUS, PLUS, TRACE_TOL, bell_state, density

D0_TOL = 1e-8
F_TOL = 1e-8

_PAULI_EIGS = {
    "0": np.array([1, 0], dtype=np.complex128),
    "1": np.array([0, 1], dtype=np.complex128),
    "+": PLUS,
    "-": MINUS,
    "+i": np.array([1, 1j], dtype=np.complex128) / np.sqrt(2),
    "-i": np.array([1, -1j], dtype=np.complex128) / np.sqrt(2),
}


def in_D0(rho, f, B, tol=D0_TOL):
    """True when the (normalised) state has ``f`` value at most ``tol``."""
    return get_functional(f)(_normalized(rho), B) <= tol


def _normalized(M):
    M = np.asarray(M, dtype=np.complex128)
    return M / np.real(np.trace(M))


def _reorder(a, B):
    """Operator with side-A factors moved to the front."""
    order = list(B.subset) + list(B.complement)
    n = len(B.dims)
    t = as_matrix(a).reshape(B.dims * 2).transpose(order + [n + i for i in order])
    return t.reshape(B.total, B.total)


def local_unitary_factors(a, B, tol=1e-10):
    """``(u, v)`` with ``a = c (u (x) v)`` for unitaries ``u, v``, else ``None``."""
    a = _reorder(a, B)
    da, db = B.dim_a, B.dim_b
    # operator-Schmidt decomposition across the cut
    R = a.reshape(da, db, da, db).transpose(0, 2, 1, 3).reshape(da * da, db * db)
    U, s, Vh = np.linalg.svd(R)
    if s[0] <= tol or (s.size > 1 and s[1] > tol * s[0]):
        return None
    u = U[:, 0].reshape(da, da) * np.sqrt(s[0])
    v = Vh[0].reshape(db, db) * np.sqrt(s[0])
    for m in (u, v):
        g = dagger(m) @ m
        c = np.real(np.trace(g)) / m.shape[0]
        if max_norm(g - c * np.eye(m.shape[0])) > tol * max(c, 1.0):
            return None
    return u / np.sqrt(np.real(np.trace(dagger(u) @ u)) / da), v / np.sqrt(np.real(np.trace(dagger(v) @ v)) / db)


def extremal_probes(B):
    """Labelled product and Bell-type probe states for the cut ``B``."""
    out = []
    if all(d == 2 for d in B.dims) and len(B.dims) <= 3:
        for labels in product(list(_PAULI_EIGS), repeat=len(B.dims)):
            psi = tensor(*[_PAULI_EIGS[lab][:, None] for lab in labels]).ravel()
            out.append(("|" + ",".join(labels) + ">", np.outer(psi, np.conj(psi))))
    else:
        D = B.total
        for i in range(D):
            M = np.zeros((D, D), dtype=np.complex128)
            M[i, i] = 1.0
            out.append((f"|e{i}>", M))
    if B.dims == (2, 2):
        for name in ("phi+", "phi-", "psi+", "psi-"):
            out.append((name, bell_state(name).matrix))
    return out


def default_probes(B, rng, n_pure=50, n_mixed=200):
    probes = extremal_probes(B)
    for i in range(n_pure):
        v = random_ket(B.total, rng)
        probes.append((f"haar_pure[{i}]", np.outer(v, np.conj(v))))
    for i in range(n_mixed):
        probes.append((f"hs_mixed[{i}]", random_density(B.total, rng).matrix))
    return probes


def _evaluate(fn, stack, B):
    if fn.batch is not None:
        return np.asarray(fn.batch(stack, B))
    return np.array([fn(S, B) for S in stack])


def _act(a, stack):
    """Normalised conjugation of every state in ``stack`` plus a vanished mask."""
    img = a @ stack @ dagger(a)
    tr = np.real(np.trace(img, axis1=-2, axis2=-1))
    vanished = tr <= TRACE_TOL
    safe = np.where(vanished, 1.0, tr)
    img = img / safe[:, None, None]
    img = 0.5 * (img + np.conj(np.swapaxes(img, -1, -2)))
    return img, vanished


@dataclass
class SemiclassicalVerdict:
    operator_id: str
    functional: str
    kind: str  # "certified" | "probe" | "nonmember"
    n_probes: int = 0
    n_vanished: int = 0
    max_increase: float = 0.0
    witness: np.ndarray = field(default=None, repr=False)
    witness_label: str = None
    f_before: float = None
    f_after: float = None

    @property
    def member(self):
        return self.kind != "nonmember"

    def to_obj(self):
        from .matcore import matrix_to_obj
        out = {"operator": self.operator_id, "functional": self.functional, "verdict": self.kind,
               "n_probes": self.n_probes, "n_vanished": self.n_vanished,
               "max_increase": self.max_increase}
        if self.witness is not None:
            out["witness"] = {"label": self.witness_label, "state": matrix_to_obj(self.witness),
                              "f_before": self.f_before, "f_after": self.f_after}
        return out


def in_Af(a, f, B, probe_states=None, tol=F_TOL, seed=0, operator_id="a",
          n_pure=50, n_mixed=200, use_certificate=True):
    """Classify ``a`` against the functional ``f`` across the cut ``B``.

    ``probe_states`` (matrices or ``(label, matrix)`` pairs) are checked
    before the generated defaults. Probes killed by ``a`` are skipped and
    counted in ``n_vanished``.
    """
    fn = get_functional(f)
    a = as_matrix(a)
    if a.shape != (B.total, B.total):
        raise ValueError(f"operator shape {a.shape} does not match the cut dims {B.dims}")
    if use_certificate and fn.local_unitary_invariant and local_unitary_factors(a, B) is not None:
        return SemiclassicalVerdict(operator_id, fn.name, "certified")
    labelled = []
    for i, p in enumerate(probe_states or []):
        labelled.append(p if isinstance(p, tuple) else (f"given[{i}]", np.asarray(p, dtype=np.complex128)))
    labelled += default_probes(B, rng_from(seed), n_pure, n_mixed)
    labels = [lab for lab, _ in labelled]
    stack = np.array([_normalized(M) for _, M in labelled])
    img, vanished = _act(a, stack)
    idx = np.flatnonzero(~vanished)
    # evaluate in chunks so expensive functionals stop at the first violation
    chunk = len(idx) if fn.batch is not None else 16
    deltas, witness = [], None
    for start in range(0, len(idx), max(chunk, 1)):
        sl = idx[start:start + chunk]
        before = _evaluate(fn, stack[sl], B)
        after = _evaluate(fn, img[sl], B)
        delta = after - before
        deltas.append(delta)
        bad = np.flatnonzero(delta > tol)
        if bad.size:
            k = bad[0]
            witness = (sl[k], float(before[k]), float(after[k]))
            break
    delta = np.concatenate(deltas) if deltas else np.zeros(0)
    verdict = SemiclassicalVerdict(operator_id, fn.name, "probe", int(delta.size), int(vanished.sum()),
                                   float(delta.max()) if delta.size else 0.0)
    if witness is not None:
        k, fb, fa = witness
        verdict.kind = "nonmember"
        verdict.witness = stack[k]
        verdict.witness_label = labels[k]
        verdict.f_before, verdict.f_after = fb, fa
    return verdict


def reverify(verdict, a, B):
    """Recompute a nonmember witness; True when the increase is reproduced."""
    if verdict.kind != "nonmember":
        return False
    fn = get_functional(verdict.functional)
    img, vanished = _act(as_matrix(a), verdict.witness[None])
    return (not vanished[0]) and fn(img[0], B) - fn(verdict.witness, B) > 0


# --------------------------------------------------------------------------- #
#                                 closure test                                #
# --------------------------------------------------------------------------- #

@dataclass
class ClosureViolation:
    seed_index: int
    word: list
    value: float
    state: np.ndarray = field(repr=False)


@dataclass
class ClosureReport:
    n_words: int
    n_seeds: int
    max_value: float
    violations: list
    verdicts: list

    @property
    def ok(self):
        return not self.violations


def closure_test(f, gates, seeds, B, n_words=1000, max_len=8, tol=D0_TOL, seed=0,
                 require_members=True, max_violations=10):
    """Apply random gate words to classical seeds and look for states leaving D0.

    Words have lengths uniform on ``1..max_len``. Every prefix of every word
    is checked. With ``require_members`` each gate must first receive a
    member verdict from :func:`in_Af`; turn it off to inject a known
    non-member deliberately.
    """
    fn = get_functional(f)
    gs = GateSet.of(gates)
    verdicts = []
    if require_members:
        for name, g in gs:
            v = in_Af(g, fn, B, operator_id=name, seed=seed)
            verdicts.append(v)
            if not v.member:
                raise ValueError(f"gate {name!r} is not a member: witness {v.witness_label}")
    seed_mats = np.array([_normalized(s) for s in seeds])
    if len(seed_mats):
        vals = _evaluate(fn, seed_mats, B)
        if np.any(vals > tol):
            raise ValueError(f"seed {int(np.argmax(vals))} is not in D0 (f = {vals.max():.3e})")
    if not len(gs) or not len(seed_mats) or n_words == 0:
        return ClosureReport(0 if not len(gs) else n_words, len(seed_mats), 0.0, [], verdicts)
    rng = rng_from(seed)
    G = np.array(gs.gates)
    lengths = rng.integers(1, max_len + 1, size=n_words)
    words = rng.integers(0, len(G), size=(n_words, max_len))
    origin = rng.integers(0, len(seed_mats), size=n_words)
    states = seed_mats[origin].copy()
    alive = np.ones(n_words, dtype=bool)
    violations, max_value = [], 0.0
    for step in range(max_len):
        active = np.flatnonzero(alive & (lengths > step))
        if not active.size:
            break
        gsel = G[words[active, step]]
        img = gsel @ states[active] @ np.conj(np.swapaxes(gsel, -1, -2))
        tr = np.real(np.trace(img, axis1=-2, axis2=-1))
        dead = tr <= TRACE_TOL
        alive[active[dead]] = False
        img = img / np.where(dead, 1.0, tr)[:, None, None]
        img = 0.5 * (img + np.conj(np.swapaxes(img, -1, -2)))
        states[active] = img
        ok = active[~dead]
        vals = _evaluate(fn, states[ok], B)
        if vals.size:
            max_value = max(max_value, float(vals.max()))
        for j in np.flatnonzero(vals > tol):
            w = ok[j]
            if len(violations) < max_violations and not any(v.word == words[w, :step + 1].tolist()
                                                            and v.seed_index == origin[w] for v in violations):
                violations.append(ClosureViolation(int(origin[w]), [gs.names[i] for i in words[w, :step + 1]],
                                                   float(vals[j]), states[w].copy()))
            alive[w] = False  # report each word once
    return ClosureReport(n_words, len(seed_mats), max_value, violations, verdicts)


# --------------------------------------------------------------------------- #
#                                group structure                              #
# --------------------------------------------------------------------------- #

@dataclass
class GroupStructureReport:
    mode: str
    identity_ok: bool = True
    closure_ok: bool = True
    inverses_ok: bool = True
    failures: list = field(default_factory=list)
    flagged_inverses: list = field(default_factory=list)
    unwitnessed: list = field(default_factory=list)

    @property
    def is_group(self):
        return self.identity_ok and self.closure_ok and self.inverses_ok


def _max_abs_change(fn, a, stack, B):
    img, vanished = _act(a, stack)
    if vanished.all():
        return 0.0
    d = _evaluate(fn, img[~vanished], B) - _evaluate(fn, stack[~vanished], B)
    return float(np.abs(d).max())


def group_structure_test(S, f, B, mode="equality", probes=None, tol=F_TOL, seed=0,
                         n_pure=20, n_mixed=40):
    """Group axioms for the equality set, or inverse failure for the strict set.

    ``equality``: identity, pairwise products and inverses of the gates must
    all leave ``f`` unchanged (``|delta f| <= tol``) on every probe.
    ``strict``: for each gate find a probe with ``delta f < -tol``; then the
    inverse acting on the image state must raise ``f`` by more than ``tol``,
    which shows the inverse is outside the set. Gates without such a probe
    are listed in ``unwitnessed``.
    """
    fn = get_functional(f)
    gs = GateSet.of(S)
    if probes is None:
        labelled = default_probes(B, rng_from(seed), n_pure, n_mixed)
    else:
        labelled = [p if isinstance(p, tuple) else (f"given[{i}]", p) for i, p in enumerate(probes)]
    labels = [lab for lab, _ in labelled]
    stack = np.array([_normalized(M) for _, M in labelled])
    report = GroupStructureReport(mode)
    d = B.total
    if mode == "equality":
        report.identity_ok = _max_abs_change(fn, np.eye(d), stack, B) <= tol
        for name, g in gs:
            if _max_abs_change(fn, g, stack, B) > tol:
                report.failures.append(("member", name))
        for (n1, g1), (n2, g2) in product(list(gs), repeat=2):
            if _max_abs_change(fn, g1 @ g2, stack, B) > tol:
                report.closure_ok = False
                report.failures.append(("product", n1, n2))
        for name, g in gs:
            if abs(np.linalg.det(g)) < 1e-12 or _max_abs_change(fn, np.linalg.inv(g), stack, B) > tol:
                report.inverses_ok = False
                report.failures.append(("inverse", name))
        if any(kind == "member" for kind, *_ in report.failures):
            report.closure_ok = False
        return report
    if mode != "strict":
        raise ValueError(f"mode must be 'equality' or 'strict', not {mode!r}")
    for name, g in gs:
        img, vanished = _act(g, stack)
        keep = np.flatnonzero(~vanished)
        delta = _evaluate(fn, img[keep], B) - _evaluate(fn, stack[keep], B)
        dec = np.flatnonzero(delta < -tol)
        if not dec.size:
            report.unwitnessed.append(name)
            continue
        k = keep[dec[0]]
        ginv = np.linalg.inv(g)
        back, _ = _act(ginv, img[k][None])
        rise = float(fn(back[0], B) - fn(img[k], B))
        if rise > tol:
            report.flagged_inverses.append({"gate": name, "probe": labels[k], "delta": float(delta[dec[0]]),
                                            "inverse_increase": rise, "witness": img[k]})
        else:
            report.failures.append(("inverse_not_flagged", name))
    # a flagged inverse leaves the strict set, so it is not a group
    report.inverses_ok = not report.flagged_inverses
    return report


def classical_universality_probe(gates, f, B, n_targets=100, depth=10, eps=0.05, seed=0, fiducial=None):
    """Fraction of random pure product targets (all in D0) reachable within ``eps``.

    Statistical only; the target family is the pure product states, which lie
    in D0 for every functional in the registry.
    """
    fn = get_functional(f)
    rng = rng_from(seed)
    targets = [random_product_pure(B.dims, rng).matrix for _ in range(n_targets)]
    vals = _evaluate(fn, np.array(targets), B)
    if np.any(vals > D0_TOL):
        raise ValueError("a target state is not classical for this functional")
    if fiducial is None:
        fiducial = np.zeros((B.total, B.total), dtype=np.complex128)
        fiducial[0, 0] = 1.0
    return universality_probe(gates, B.total, depth=depth, eps=eps, seed=rng,
                              targets=targets, fiducial=density(fiducial))


def verdict_for(a, f, B, **kw):
    """Run the check-A precondition and then :func:`in_Af`."""
    cert = in_check_A(a)
    if not cert.member:
        raise ValueError(f"operator is outside check-A (min eig of a*a = {cert.min_eig:.3e})")
    return in_Af(a, f, B, **kw)


__all__ = [
    "Bipartition", "ClosureReport", "GroupStructureReport", "SemiclassicalVerdict",
    "classical_universality_probe", "closure_test", "extremal_probes", "group_structure_test",
    "in_Af", "in_D0", "local_unitary_factors", "reverify", "verdict_for",
]
