import json

import numpy as np
import pytest

from fibersim import cli
from fibersim.fileio import dumps, write_bundle
from fibersim.matcore import matrix_to_obj
from fibersim.states import bell_state
from fibersim.topology import discrete, validate

X = np.array([[0, 1], [1, 0]], complex)
Z = np.diag([1.0, -1.0]).astype(complex)
H = np.array([[1, 1], [1, -1]], complex) / np.sqrt(2)


def write(path, obj):
    path.write_text(obj if isinstance(obj, str) else dumps(obj))
    return str(path)


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_topology_validate_ok(tmp_path, capsys):
    f = write(tmp_path / "t.json", discrete(["a", "b", "c"]).to_obj())
    code, out, _ = run(capsys, "topology", "validate", f, "-o", tmp_path / "out")
    assert code == 0 and "8 opens, valid" in out


def test_topology_validate_violation(tmp_path, capsys):
    f = write(tmp_path / "t.json", {"points": ["a", "b", "c"], "opens": [[], ["a"], ["b"], ["a", "b", "c"]]})
    code, out, _ = run(capsys, "topology", "validate", f)
    data = json.loads(out)
    assert code == 1 and data["valid"] is False and "NotClosedUnderUnion" in json.dumps(data)


def test_malformed_json_reports_location(tmp_path, capsys):
    f = write(tmp_path / "t.json", '{"points": ["a"],\n "opens": [[], ["a"]\n')
    code, _, err = run(capsys, "topology", "validate", f)
    assert code == 2 and "line 3" in err


def test_missing_file_exit_2(tmp_path, capsys):
    code, _, err = run(capsys, "channel", "check", tmp_path / "nope.json")
    assert code == 2 and "cannot read" in err


def test_unknown_functional_exit_2(tmp_path, capsys):
    f = write(tmp_path / "u.json", matrix_to_obj(np.eye(4)))
    code, _, _ = run(capsys, "classify", "--op", f, "--functional", "nope")
    assert code == 2


def test_measure_negativity_bell(tmp_path, capsys):
    f = write(tmp_path / "bell.json", matrix_to_obj(bell_state().matrix))
    code, out, _ = run(capsys, "measure", "negativity", "--state", f)
    data = json.loads(out)
    assert code == 0 and abs(data["value"] - 0.5) < 1e-12
    assert data["metadata"]["functional"] == "negativity"
    code, out, _ = run(capsys, "measure", "mutual_information", "--state", f, "--bits")
    assert abs(json.loads(out)["value"] - 2.0) < 1e-9


def test_channel_check(tmp_path, capsys):
    p = 0.3
    K = [np.sqrt(1 - p) * np.eye(2), np.sqrt(p) * X]
    good = write(tmp_path / "c.json", {"input_dim": 2, "output_dim": 2, "kraus": [matrix_to_obj(k) for k in K]})
    bad = write(tmp_path / "b.json", {"input_dim": 2, "output_dim": 2,
                                      "kraus": [matrix_to_obj(np.eye(2)), matrix_to_obj(0.5 * X)]})
    assert run(capsys, "channel", "check", good)[0] == 0
    assert run(capsys, "channel", "check", bad)[0] == 1


def test_classify_cnot_outside(tmp_path, capsys):
    cnot = np.eye(4, dtype=complex)[[0, 1, 3, 2]]
    f = write(tmp_path / "cnot.json", matrix_to_obj(cnot))
    code, out, _ = run(capsys, "classify", "--op", f, "--functional", "negativity")
    data = json.loads(out)
    assert code == 0 and data["verdict"] == "nonmember" and abs(data["max_increase"] - 0.5) < 1e-9


def test_fibration_assemble(tmp_path, capsys):
    T = discrete(["1", "2"])
    write_bundle(tmp_path / "good", T, {("1",): "full", ("2",): "full", ("1", "2"): "full"},
                 inits={("1", "2"): bell_state().matrix}, gates={("1",): {"H": H}})
    code, out, _ = run(capsys, "fibration", "assemble", tmp_path / "good")
    assert code == 0 and json.loads(out)["violations"] == []
    write_bundle(tmp_path / "bad", T, {("1",): [Z], ("1", "2"): [np.kron(X, X)]})
    code, out, _ = run(capsys, "fibration", "assemble", tmp_path / "bad")
    assert code == 1 and json.loads(out)["violations"][0]["type"] == "IsotonyViolation"


def test_alpha_check(tmp_path, capsys):
    alpha = {"kind": "table", "values": {"a": 3, "b": 2, "c": 1, "d": 1.5, "e": 1.5}}
    g = write(tmp_path / "g.json", {"points": [["a", "a", "a"], ["b", "d", "e"], ["c", "c", "c"]], "alpha": alpha})
    code, out, _ = run(capsys, "alpha", "check", "--grid", g)
    assert code == 0 and json.loads(out)["verdict"] == "OneWayOnly"
    g = write(tmp_path / "m.json", {"points": [["a", "a"], ["b", "d"], ["c", "x"]], "alpha": alpha})
    assert run(capsys, "alpha", "check", "--grid", g)[0] in (1, 2)


POLY = """[units]
sequence = "ABAB"
[couplings]
J_AB = 1.0
J_BA = 1.0
h_A = 0.5
h_B = -0.5
[schedule]
family = "linear"
[run]
T = [5.0, 10.0]
n_steps = 200
record_every = 20
"""


def test_anneal_deterministic(tmp_path, capsys):
    cfg = write(tmp_path / "poly.toml", POLY)
    outs = []
    for name in ("r1", "r2"):
        code, out, _ = run(capsys, "polymer", "anneal", cfg, "-o", tmp_path / name, "--seed", 7)
        assert code == 0 and "fidelity" in out
        outs.append(tmp_path / name)
    files = sorted(p.name for p in outs[0].iterdir())
    assert "manifest.json" in files and any(f.endswith(".csv") for f in files)
    for name in files:
        if name != "manifest.json":
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
    data = json.loads((outs[0] / "anneal.json").read_text())
    assert len(data["manifest_hash"]) == 64


def test_bad_toml_exit_2(tmp_path, capsys):
    cfg = write(tmp_path / "bad.toml", "[units\nsequence = 1\n")
    code, _, err = run(capsys, "polymer", "anneal", cfg)
    assert code == 2 and "line" in err


def test_csv_format(tmp_path, capsys):
    f = write(tmp_path / "bell.json", matrix_to_obj(bell_state().matrix))
    code, out, _ = run(capsys, "measure", "negativity", "--state", f, "--format", "csv")
    assert code == 0 and out.splitlines()[0] == "functional,value"


@pytest.mark.parametrize("argv", [[], ["bogus"], ["measure", "negativity"]])
def test_usage_errors(argv, capsys):
    assert cli.main(argv) == 2
