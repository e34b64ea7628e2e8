"""Command line front end: ``fibersim <group> <command> [options]``.

Exit codes: 0 success, 1 domain violation (invalid topology, non-CPTP channel,
failed assembly, ...), 2 unreadable or malformed input.

Without ``--out`` the JSON document (or CSV with ``--format csv``) goes to
stdout. With ``--out DIR`` outputs are written atomically into ``DIR``
together with ``manifest.json`` and a one-line summary is printed. Every
JSON output embeds ``manifest_hash``, a digest of the subcommand, input file
contents, seed, tolerance, options and tool version. The timestamp lives
only in ``manifest.json`` and is excluded from the hash.
"""
import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .fileio import (InputError, dumps, field as get_field, gates_from_obj, load_bundle, load_json,
                     load_matrix, load_state, matrix, state_from_obj, write_atomic)

log = logging.getLogger("fibersim")

LN2 = math.log(2)


def _setup_logging():
    level = os.environ.get("FIBERSIM_LOG", "WARNING").upper()
    if level.isdigit():
        level = int(level)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


# --------------------------------------------------------------------------- #
#                                   manifest                                  #
# --------------------------------------------------------------------------- #

def _digest(path):
    p = Path(path)
    h = hashlib.sha256()
    if p.is_dir():
        for f in sorted(p.rglob("*")):
            if f.is_file():
                h.update(str(f.relative_to(p)).encode())
                h.update(f.read_bytes())
    elif p.is_file():
        h.update(p.read_bytes())
    return h.hexdigest()


@dataclass
class RunManifest:
    subcommand: str
    inputs: list
    seed: int
    tol: float
    out: str
    version: str = __version__
    options: dict = field(default_factory=dict)
    timestamp: str = None

    def hashed_fields(self):
        # output location and timestamp do not influence results
        return {"subcommand": self.subcommand, "inputs": [i["sha256"] for i in self.inputs],
                "seed": self.seed, "tol": self.tol, "version": self.version, "options": self.options}

    @property
    def config_hash(self):
        text = json.dumps(self.hashed_fields(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()

    def to_obj(self):
        obj = asdict(self)
        obj["config_hash"] = self.config_hash
        return obj


def seed_streams(seed, n):
    """Independent generators for ``n`` jobs from one seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


@dataclass
class Result:
    name: str
    data: dict
    tables: dict = field(default_factory=dict)   # file stem -> CSV text
    summary: str = ""
    code: int = 0


# --------------------------------------------------------------------------- #
#                                  handlers                                   #
# --------------------------------------------------------------------------- #

def cmd_topology_validate(args, rng):
    from .topology import TopologyViolation, UnknownPoint, generate_from_basis, validate

    obj = load_json(args.file)
    points = get_field(obj, "points", args.file)
    try:
        if "opens" in obj:
            T = validate(points, obj["opens"])
        else:
            T = generate_from_basis(points, obj.get("basis", []))
    except TopologyViolation as exc:
        data = {"valid": False, "violation": type(exc).__name__, "axiom": getattr(exc, "axiom", None), "message": str(exc),
                "witness": [list(w) for w in exc.witness]}
        return Result("topology", data, summary=f"invalid: {type(exc).__name__}", code=1)
    except UnknownPoint as exc:
        raise InputError(f"{args.file}: unknown point {exc.args[0]!r}") from None
    n = len(T.opens)
    data = {"valid": True, "n_points": len(T.points), "n_opens": n, "discrete": T.is_discrete(),
            "opens": T.to_obj()["opens"], "summary": f"{n} opens, valid"}
    return Result("topology", data, summary=f"{n} opens, valid")


def _generator_list(obj, path):
    """Gate-set file: a list of named matrix objects or ``{"dim", "generators"}``."""
    if isinstance(obj, list):
        items = obj
    else:
        items = get_field(obj, "generators", path)
    mats = []
    for item in items:
        if isinstance(item, dict) and "matrix" in item:
            item = item["matrix"]
        mats.append(matrix(item, path))
    if isinstance(obj, dict) and "dim" in obj:
        d = int(obj["dim"])
    elif mats:
        d = mats[0].shape[0]
    else:
        raise InputError(f"{path}: empty gate set needs a 'dim' field")
    return mats, d


def cmd_algebra_commutant(args, rng):
    from .algebra import commutant, generate_algebra, is_von_neumann

    gens, d = _generator_list(load_json(args.file), args.file)
    tol = args.tol or 1e-9
    A = generate_algebra(gens, d, tol)
    C = commutant(A, tol)
    data = {"dim": d, "algebra_size": A.size, "commutant_size": C.size,
            "von_neumann": bool(is_von_neumann(A, tol)), "commutant_basis": list(C.basis)}
    return Result("commutant", data, summary=f"algebra {A.size}, commutant {C.size}")


def cmd_algebra_orbit(args, rng):
    from .algebra import orbit

    obj = load_json(args.file)
    rho = state_from_obj(get_field(obj, "state", args.file), args.file)
    gates = gates_from_obj(get_field(obj, "gates", args.file), args.file)
    depth = int(args.depth if args.depth is not None else obj.get("depth", 8))
    orb = orbit(rho, gates, max_depth=depth, tol=args.tol or 1e-9)
    data = {"size": len(orb), "depth": depth, "states": [S.matrix for S in orb]}
    return Result("orbit", data, summary=f"orbit of {len(orb)} states")


def cmd_channel_check(args, rng):
    from .channels import KrausChannel, check_channel

    obj = load_json(args.file)
    ops = [matrix(m, args.file) for m in get_field(obj, "kraus", args.file)]
    if not ops:
        raise InputError(f"{args.file}: empty Kraus list")
    tol = args.tol or 1e-9
    C = KrausChannel(ops, tol=np.inf)
    rep = check_channel(C, tol)
    data = {"input_dim": rep.input_dim, "output_dim": rep.output_dim, "choi_min_eig": rep.choi_min_eig,
            "completely_positive": rep.completely_positive, "trace_preserving": rep.trace_preserving,
            "completeness_residual": C.residual, "cptp": rep.cptp}
    return Result("channel", data, summary="CPTP" if rep.cptp else "not CPTP", code=0 if rep.cptp else 1)


def _cut(args, D):
    from .correlation import Bipartition

    if args.dims:
        dims = tuple(int(x) for x in args.dims.split(","))
    else:
        n = int(round(math.log2(D)))
        if 2 ** n != D:
            raise InputError(f"state dimension {D} is not a power of two; pass --dims")
        dims = (2,) * n
    subset = tuple(int(x) for x in str(args.cut).split(",") if x != "")
    return Bipartition(dims, subset)


def cmd_measure(args, rng):
    from .correlation import ree_estimate, get_functional, discord
    from .states import density

    rho = density(load_state(args.state))
    B = _cut(args, rho.dim)
    scale = 1 / LN2 if args.bits else 1.0
    name = args.functional
    details = {}
    if name == "ree":
        r = ree_estimate(rho, B, seed=rng)
        value, exactness = r.value, r.exactness
    elif name == "discord":
        r = discord(rho, B, return_details=True)
        value, exactness = r.value, "optimized"
        details = {"raw": r.raw * scale, "measured_factors": list(r.measured), "theta": r.theta, "phi": r.phi}
    else:
        fn = get_functional(name)
        value, exactness = fn(rho, B), fn.exactness
    unit = "bits" if args.bits else "nats"
    if name == "negativity":
        unit, scale = "none", 1.0
    data = {"value": value * scale, "exactness": exactness,
            "metadata": {"functional": name, "unit": unit, "dims": list(B.dims), "subset": list(B.subset),
                         **details}}
    table = f"functional,value\n{name},{value * scale!r}\n"
    return Result("measure", data, {"measure": table}, summary=f"{name} = {value * scale:.12g}")


def cmd_classify(args, rng):
    from .algebra import in_check_A
    from .semiclassical import in_Af

    a = load_matrix(args.op)
    B = _cut(args, a.shape[0])
    cert = in_check_A(a)
    if not cert.member:
        data = {"operator": Path(args.op).stem, "verdict": "outside_check_A", "min_eig": cert.min_eig}
        return Result("classify", data, summary="operator is not injective", code=1)
    v = in_Af(a, args.functional, B, tol=args.tol or 1e-8, seed=rng, operator_id=Path(args.op).stem)
    return Result("classify", v.to_obj(), summary=f"{v.kind}")


def _fibration(args):
    from .fibration import assemble

    kw = load_bundle(args.dir)
    topo = kw.pop("topology")
    return assemble(topo, raise_first=False, seed=int(args.seed), **kw)


def cmd_fibration_assemble(args, rng):
    F = _fibration(args)
    T = F.topology
    viol = F.metadata["violations"]
    data = {"points": list(T.points), "n_opens": len(T.opens),
            "algebra_sizes": {",".join(T.labels(m)): F.alg[m].size for m in T.sorted_opens()},
            "violations": [{"type": type(v).__name__, "message": str(v)} for v in viol],
            "covariance": F.metadata["covariance"], "valid": not viol}
    return Result("fibration", data, summary="assembled" if not viol else f"{len(viol)} violations",
                  code=1 if viol else 0)


def cmd_fibration_fiber(args, rng):
    F = _fibration(args)
    if F.metadata["violations"]:
        v = F.metadata["violations"][0]
        return Result("fiber", {"error": type(v).__name__, "message": str(v)}, summary=str(v), code=1)
    if args.depth is not None:
        F.orbit_depth = int(args.depth)
    fib = F.fiber(args.open)
    data = {"open": args.open, "empty": len(fib) == 0, "size": len(fib), "states": [S.matrix for S in fib]}
    return Result("fiber", data, summary="empty fiber" if not fib else f"fiber of {len(fib)} states")


def _anneal_job(payload):
    from .polymer import anneal, ground_space

    spec, schedule, T, n_steps, every = payload
    tr = anneal(spec, schedule, T=T, n_steps=n_steps, record_every=every)
    e0, _ = ground_space(tr.final_hamiltonian)
    return {"T": T, "fidelity": tr.fidelity(), "trace_drift": tr.trace_drift,
            "final_energy": float(tr.energy[-1]), "ground_energy": e0}, tr.to_csv()


def _map_jobs(fn, payloads, jobs):
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, payloads))
    return [fn(p) for p in payloads]


def _load_polymer(path):
    from .polymer import load_config

    try:
        return load_config(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    except Exception as exc:
        if type(exc).__name__ == "TOMLDecodeError":
            raise InputError(f"{path}: invalid TOML: {exc}") from None
        raise


def cmd_polymer_anneal(args, rng):
    cfg = _load_polymer(args.config)
    Ts = cfg.run["T"] if isinstance(cfg.run["T"], list) else [cfg.run["T"]]
    payloads = [(cfg.spec, cfg.schedule, float(T), int(cfg.run["n_steps"]), int(cfg.run["record_every"]))
                for T in Ts]
    out = _map_jobs(_anneal_job, payloads, args.jobs)
    tables = {}
    for (summary, text), T in zip(out, Ts):
        tables[f"trajectory_T{float(T):g}"] = text
    runs = [s for s, _ in out]
    data = {"units": cfg.spec.units, "schedule": cfg.schedule.family, "runs": runs}
    best = runs[-1]
    return Result("anneal", data, tables, summary=f"fidelity {best['fidelity']:.6f} at T={best['T']:g}")


def cmd_polymer_evolve(args, rng):
    from .polymer import evolve_general

    cfg = _load_polymer(args.config)
    if cfg.tables is None:
        raise InputError(f"{args.config}: missing [evolve] section")
    tr = evolve_general(cfg.spec, cfg.tables, T=float(cfg.run["T"]), n_steps=int(cfg.run["n_steps"]),
                        record_every=int(cfg.run["record_every"]))
    data = {"units": cfg.spec.units, "target_reached": tr.metadata["target_reached"],
            "trace_drift": tr.trace_drift, "final_energy": float(tr.energy[-1]),
            "final_entanglement": tr.entanglement[-1] if tr.entanglement.size else []}
    return Result("evolve", data, {"trajectory": tr.to_csv()},
                  summary="target reached" if data["target_reached"] else "target not reached")


def cmd_alpha_check(args, rng):
    from .alphapath import BoundaryMismatch, equivalence_check, grid_from_obj, is_alpha_homotopy

    path = Path(args.grid)
    obj = load_json(path)
    try:
        gf = grid_from_obj(obj, path.parent, args.functional, loader=load_state)
    except KeyError as exc:
        raise InputError(f"{path}: missing field {exc.args[0]!r}") from None
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    try:
        rep = equivalence_check(gf.grid, gf.f0, gf.f1, gf.alpha)
    except BoundaryMismatch as exc:
        return Result("alpha", {"error": "BoundaryMismatch", "message": str(exc)}, summary=str(exc), code=1)
    Gr = gf.grid.reverse()
    back = is_alpha_homotopy(Gr, Gr.f0, Gr.f1, gf.alpha)
    data = {"verdict": rep.verdict.value, "homotopy": rep.homotopy.holds,
            "witness": list(rep.homotopy.witness) if rep.homotopy.witness else None,
            "reverse_homotopy": back.holds,
            "reverse_witness": list(back.witness) if back.witness else None,
            "max_row_variation": rep.max_row_variation, "functional": gf.alpha.name,
            "note": rep.note}
    return Result("alpha", data, summary=rep.verdict.value)


# --------------------------------------------------------------------------- #
#                                    parser                                   #
# --------------------------------------------------------------------------- #

SCHEMAS = {
    "topology": 'topology file: {"points": [...], "opens": [[...], ...]} or {"points", "basis"}',
    "commutant": 'gate-set file: [{"name", "matrix"}, ...] or {"dim": d, "generators": [matrix, ...]}',
    "orbit": 'orbit file: {"state": matrix | {"ket": [...]}, "gates": {name: matrix}, "depth"?}',
    "channel": 'channel file: {"input_dim", "output_dim", "kraus": [matrix, ...]}',
    "matrix": 'matrix: {"rows": n, "cols": m, "entries": [[re, im], ...]} (row-major)',
    "bundle": "bundle dir: topology.json, algebras/, states/, gates/, restrictions.json",
    "polymer": "config (TOML or JSON): [units] sequence, [local_ops], [couplings], [schedule], [run], [evolve]",
    "grid": 'grid file: {"points": [[ref, ...], ...], "s"?, "t"?, "alpha": {"kind", ...}}',
}


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--tol", type=float, default=None, help="override the default tolerance")
    p.add_argument("-o", "--out", default=None, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel jobs for sweeps")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--bits", action="store_true", help="report entropic values in bits")
    p.add_argument("--plot", action="store_true", help="also write a plotting script for CSV outputs")
    return p


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="fibersim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fibersim {__version__}")
    groups = parser.add_subparsers(dest="group", required=True)

    def sub(group_parser, name, fn, schema, **kw):
        p = group_parser.add_parser(name, parents=[common], epilog=SCHEMAS[schema], **kw)
        p.set_defaults(fn=fn, cmd_name=name)
        return p

    g = groups.add_parser("topology").add_subparsers(dest="cmd", required=True)
    sub(g, "validate", cmd_topology_validate, "topology").add_argument("file")

    g = groups.add_parser("algebra").add_subparsers(dest="cmd", required=True)
    sub(g, "commutant", cmd_algebra_commutant, "commutant").add_argument("file")
    p = sub(g, "orbit", cmd_algebra_orbit, "orbit")
    p.add_argument("file")
    p.add_argument("--depth", type=int, default=None)

    g = groups.add_parser("channel").add_subparsers(dest="cmd", required=True)
    sub(g, "check", cmd_channel_check, "channel").add_argument("file")

    p = groups.add_parser("measure", parents=[common], epilog=SCHEMAS["matrix"])
    p.set_defaults(fn=cmd_measure, cmd_name="measure")
    p.add_argument("functional", choices=FUNCTIONAL_NAMES)
    p.add_argument("--state", required=True)
    p.add_argument("--cut", default="0", help="comma-separated factor indices of side A")
    p.add_argument("--dims", default=None, help="comma-separated local dimensions (default: qubits)")

    p = groups.add_parser("classify", parents=[common], epilog=SCHEMAS["matrix"])
    p.set_defaults(fn=cmd_classify, cmd_name="classify")
    p.add_argument("--op", required=True)
    p.add_argument("--functional", required=True, choices=FUNCTIONAL_NAMES)
    p.add_argument("--cut", default="0")
    p.add_argument("--dims", default=None)

    g = groups.add_parser("fibration").add_subparsers(dest="cmd", required=True)
    sub(g, "assemble", cmd_fibration_assemble, "bundle").add_argument("dir")
    p = sub(g, "fiber", cmd_fibration_fiber, "bundle")
    p.add_argument("dir")
    p.add_argument("--open", required=True, help="comma-separated point labels")
    p.add_argument("--depth", type=int, default=None)

    g = groups.add_parser("polymer").add_subparsers(dest="cmd", required=True)
    sub(g, "anneal", cmd_polymer_anneal, "polymer").add_argument("config")
    sub(g, "evolve", cmd_polymer_evolve, "polymer").add_argument("config")

    g = groups.add_parser("alpha").add_subparsers(dest="cmd", required=True)
    p = sub(g, "check", cmd_alpha_check, "grid")
    p.add_argument("--grid", required=True)
    p.add_argument("--functional", default=None)
    return parser


def _inputs(args):
    paths = []
    for key in ("file", "state", "op", "dir", "config", "grid"):
        v = getattr(args, key, None)
        if v is not None:
            paths.append({"path": str(v), "sha256": _digest(v)})
    return paths


def _options(args):
    skip = {"fn", "seed", "tol", "out", "jobs", "file", "state", "op", "dir", "config", "grid", "plot"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


PLOT_TEMPLATE = '''"""Plot {csv_name} (generated by fibersim)."""
import csv
import sys

import matplotlib.pyplot as plt

with open("{csv_name}") as fh:
    rows = list(csv.DictReader(fh))
cols = [c for c in rows[0] if c != "t"]
t = [float(r["t"]) for r in rows]
fig, axes = plt.subplots(len(cols), 1, sharex=True, figsize=(6, 2 * len(cols)))
for ax, c in zip(axes if len(cols) > 1 else [axes], cols):
    ax.plot(t, [float(r[c]) for r in rows])
    ax.set_ylabel(c)
axes[-1].set_xlabel("t") if len(cols) > 1 else axes.set_xlabel("t")
fig.tight_layout()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "{stem}.png")
'''


def _flat_csv(data):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in sorted(data.items()):
        if isinstance(v, (str, int, float, bool)) or v is None:
            w.writerow([k, repr(v) if isinstance(v, float) else v])
    return buf.getvalue()


def _emit(args, manifest, res):
    data = dict(res.data)
    data["manifest_hash"] = manifest.config_hash
    if args.out:
        out = Path(args.out)
        write_atomic(out / f"{res.name}.json", dumps(data))
        for stem, text in res.tables.items():
            write_atomic(out / f"{stem}.csv", text)
            if args.plot:
                write_atomic(out / f"plot_{stem}.py", PLOT_TEMPLATE.format(csv_name=f"{stem}.csv", stem=stem))
        manifest.timestamp = datetime.now(timezone.utc).isoformat()
        write_atomic(out / "manifest.json", dumps(manifest.to_obj()))
        print(res.summary)
    elif args.format == "csv":
        if res.tables:
            sys.stdout.write("".join(res.tables.values()))
        else:
            sys.stdout.write(_flat_csv(data))
    else:
        sys.stdout.write(dumps(data))


FUNCTIONAL_NAMES = ("negativity", "log_negativity", "mutual_information", "discord", "ree")


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    sub = f"{args.group} {getattr(args, 'cmd', '') or ''}".strip()
    try:
        manifest = RunManifest(sub, _inputs(args), int(args.seed), args.tol, args.out, options=_options(args))
        rng = seed_streams(args.seed, 1)[0]
        log.info("running %s (manifest %s)", sub, manifest.config_hash[:12])
        res = args.fn(args, rng)
        _emit(args, manifest, res)
        return res.code
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError) as exc:
        print(f"violation: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
