"""Reading and writing the JSON file formats used by the command line."""
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .matcore import matrix_from_obj, matrix_to_obj


class InputError(Exception):
    """Unreadable or malformed input file (exit code 2)."""


def load_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def field(obj, key, path="input"):
    try:
        return obj[key]
    except (KeyError, TypeError):
        raise InputError(f"{path}: missing field {key!r}") from None


def matrix(obj, path="input"):
    try:
        return matrix_from_obj(obj)
    except (ValueError, TypeError) as exc:
        raise InputError(f"{path}: {exc}") from None


def load_matrix(path):
    obj = load_json(path)
    if isinstance(obj, dict) and "matrix" in obj:
        obj = obj["matrix"]
    return matrix(obj, path)


def state_from_obj(obj, path="input"):
    """Density matrix from a matrix object, ``{"state": ...}`` or ``{"ket": [[re, im], ...]}``."""
    if isinstance(obj, dict) and "ket" in obj:
        try:
            v = np.array([complex(e[0], e[1]) if isinstance(e, list) else complex(e) for e in obj["ket"]])
        except (TypeError, IndexError, ValueError):
            raise InputError(f"{path}: ket entries must be numbers or [re, im] pairs") from None
        v = v / np.linalg.norm(v)
        return np.outer(v, np.conj(v))
    if isinstance(obj, dict) and "state" in obj:
        return state_from_obj(obj["state"], path)
    return matrix(obj, path)


def load_state(path):
    return state_from_obj(load_json(path), path)


def gates_from_obj(obj, path="input"):
    """``{"name": matrix, ...}`` or a list of matrices."""
    if isinstance(obj, dict):
        return {str(k): matrix(v, path) for k, v in obj.items()}
    if isinstance(obj, list):
        return {f"g{i}": matrix(v, path) for i, v in enumerate(obj)}
    raise InputError(f"{path}: gates must be an object or a list of matrices")


def jsonable(x):
    """Convert numpy scalars/arrays and dataclass-like values for ``json.dumps``."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        if x.ndim == 2 and np.iscomplexobj(x):
            return matrix_to_obj(x)
        return jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def dumps(obj):
    return json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_atomic(path, text):
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------------------- #
#                               fibration bundles                             #
# --------------------------------------------------------------------------- #

def load_bundle(directory):
    """Read a bundle directory into keyword arguments for ``fibration.assemble``.

    Layout::

        topology.json        {"points", "opens" | "basis", "local_dims"?}
        algebras/*.json      {"open", "kind": "full"|"scalars"|"generated"|"span", "generators"?}
        states/*.json        {"open", "state": matrix | {"ket": ...}}
        gates/*.json         {"open", "gates": {name: matrix}}
        restrictions.json    {"overrides": [{"from", "to", "kind": "projection", "projector"}]}

    Every file except ``topology.json`` is optional.
    """
    from .algebra import full_algebra, generate_algebra, from_span, scalars
    from .fibration import ProjectionRestriction
    from .topology import generate_from_basis, validate

    d = Path(directory)
    if not d.is_dir():
        raise InputError(f"{d} is not a directory")
    tpath = d / "topology.json"
    tobj = load_json(tpath)
    points = field(tobj, "points", tpath)
    if "opens" in tobj:
        topo = validate(points, tobj["opens"])
    else:
        topo = generate_from_basis(points, tobj.get("basis", []))
    ld = tobj.get("local_dims")
    local_dims = None if ld is None else (ld if isinstance(ld, dict) else list(ld))
    dims_of = {p: int((ld or {}).get(p, 2)) if isinstance(ld, dict) else (int(ld[i]) if ld else 2)
               for i, p in enumerate(topo.points)}

    def open_key(obj, path):
        return tuple(str(p) for p in field(obj, "open", path))

    def dim(U):
        return int(np.prod([dims_of[p] for p in U])) if U else 1

    algebras = {}
    for path in sorted((d / "algebras").glob("*.json")) if (d / "algebras").is_dir() else []:
        obj = load_json(path)
        U = open_key(obj, path)
        kind = obj.get("kind", "generated")
        n = dim(U)
        if kind == "full":
            algebras[U] = full_algebra(n)
        elif kind == "scalars":
            algebras[U] = scalars(n)
        elif kind == "generated":
            algebras[U] = generate_algebra([matrix(m, path) for m in obj.get("generators", [])], n)
        elif kind == "span":
            algebras[U] = from_span([matrix(m, path) for m in field(obj, "generators", path)], n)
        else:
            raise InputError(f"{path}: unknown algebra kind {kind!r}")
    inits = {}
    for path in sorted((d / "states").glob("*.json")) if (d / "states").is_dir() else []:
        obj = load_json(path)
        inits[open_key(obj, path)] = state_from_obj(field(obj, "state", path), path)
    gates = {}
    for path in sorted((d / "gates").glob("*.json")) if (d / "gates").is_dir() else []:
        obj = load_json(path)
        gates[open_key(obj, path)] = gates_from_obj(field(obj, "gates", path), path)
    restrictions = {}
    rpath = d / "restrictions.json"
    if rpath.exists():
        robj = load_json(rpath)
        default = robj.get("default", "partial_trace")
        if default != "partial_trace":
            raise InputError(f"{rpath}: only 'partial_trace' is supported as the default restriction")
        for o in robj.get("overrides", []):
            U = tuple(str(p) for p in field(o, "from", rpath))
            V = tuple(str(p) for p in field(o, "to", rpath))
            kind = o.get("kind", "projection")
            if kind == "projection":
                restrictions[(U, V)] = ProjectionRestriction(matrix(field(o, "projector", rpath), rpath))
            elif kind != "partial_trace":
                raise InputError(f"{rpath}: unknown restriction kind {kind!r}")
    return {"topology": topo, "algebras": algebras, "inits": inits, "gates": gates,
            "restrictions": restrictions, "local_dims": local_dims}


def write_bundle(directory, topology, algebras=(), inits=None, gates=None, local_dims=None):
    """Write a bundle; ``algebras`` maps opens to ``"full"`` or a generator list."""
    d = Path(directory)
    tobj = topology.to_obj()
    if local_dims is not None:
        tobj["local_dims"] = local_dims
    write_atomic(d / "topology.json", dumps(tobj))

    def name(U):
        return "open_" + ("_".join(U) if U else "empty") + ".json"

    for U, spec in dict(algebras).items():
        U = tuple(U)
        obj = {"open": list(U)}
        if isinstance(spec, str):
            obj["kind"] = spec
        else:
            obj["kind"] = "generated"
            obj["generators"] = [matrix_to_obj(g) for g in spec]
        write_atomic(d / "algebras" / name(U), dumps(obj))
    for U, rho in (inits or {}).items():
        write_atomic(d / "states" / name(tuple(U)), dumps({"open": list(U), "state": matrix_to_obj(rho)}))
    for U, gs in (gates or {}).items():
        write_atomic(d / "gates" / name(tuple(U)),
                     dumps({"open": list(U), "gates": {k: matrix_to_obj(g) for k, g in gs.items()}}))
