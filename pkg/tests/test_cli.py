import json
import math
from pathlib import Path

import numpy as np
import pytest

from conormal.cli import FIXTURES, main
from conormal.config import ConfigError, parse_config

GOLDEN = Path(__file__).parent / "golden"
ROTATION = str(FIXTURES / "rotation.csv")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def same_doc(a, b, tol=1e-9):
    """Equal structure, exact strings and integers, floats to an absolute tolerance."""
    if isinstance(a, dict):
        return isinstance(b, dict) and a.keys() == b.keys() and all(same_doc(a[k], b[k], tol) for k in a)
    if isinstance(a, list):
        return isinstance(b, list) and len(a) == len(b) and all(same_doc(x, y, tol) for x, y in zip(a, b))
    if isinstance(a, float) or isinstance(b, float):
        return isinstance(b, (int, float)) and not isinstance(b, bool) and math.isclose(a, b, abs_tol=tol)
    return a == b


@pytest.mark.parametrize(
    "golden, argv",
    [
        ("maslov_rotation.json", ["maslov", "--path", ROTATION]),
        ("cz_harmonic.json", ["cz", "--preset", "harmonic", "--omega", "1"]),
        ("verify_index_harmonic4.json", ["verify-index", "--preset", "harmonic", "--omega", "4",
                                         "--boundary", "dirichlet"]),
        ("morse_complex_pendulum.json", ["morse-complex", "--preset", "pendulum", "--boundary", "diagonal",
                                         "--classes", "0"]),
        ("solve_bvp_harmonic4.json", ["solve-bvp", "--preset", "harmonic", "--omega", "4",
                                      "--boundary", "dirichlet", "--seeds", "8"]),
    ],
)
def test_golden_reports(tmp_path, capsys, golden, argv):
    out = tmp_path / "report.json"
    code, _, _ = run(capsys, *argv, "-o", out)
    assert code == 0
    assert same_doc(json.loads(out.read_text()), json.loads((GOLDEN / golden).read_text()))


def test_maslov_rotation(capsys):
    code, out, _ = run(capsys, "maslov", "--path", ROTATION, "--target", "vertical")
    doc = json.loads(out)
    assert code == 0 and doc["index"] == {"twice_value": -2, "value": "-1"}


def test_verify_index_oscillator(capsys, tmp_path):
    table = tmp_path / "t.csv"
    code, out, _ = run(capsys, "verify-index", "--preset", "harmonic", "--omega", "4", "--boundary", "dirichlet",
                       "--csv", table)
    assert code == 0
    summary = out.strip().splitlines()[-1]
    assert summary == "summary: 1/1 passed; i=1 mu_Q=1 nu=0 -> pass"
    assert table.read_text().splitlines()[1].startswith("harmonic,1,0,1,1,0,0,0,3,3/2,2,1,-1/2,0,0,")


def test_verify_index_sweep(capsys):
    code, out, _ = run(capsys, "verify-index", "--preset", "harmonic", "--omegas", "1,2,4,7",
                       "--boundary", "neumann")
    rows = out.strip().splitlines()
    assert code == 0 and len(rows) == 6
    assert [r.split(",")[3] for r in rows[1:5]] == ["1", "1", "2", "3"]


def test_morse_index_command(capsys):
    code, out, _ = run(capsys, "morse-index", "--preset", "harmonic", "--omega", "7", "--boundary", "dirichlet")
    doc = json.loads(out)
    assert code == 0 and doc["agree"] and doc["eigen"]["index"] == 2 and doc["crossing"]["index"] == 2


def test_solve_bvp_is_deterministic(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text(
        "[system]\npreset = pendulum\neps = 0.1\n\n[boundary]\ntype = diagonal\n\n"
        "[solver]\nseeds = 12\nseed = 5\n"
    )
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "solve-bvp", "--config", cfg, "-o", a)[0] == 0
    assert run(capsys, "solve-bvp", "--config", cfg, "-o", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert [o["index"]["twice_value"] for o in doc["orbits"]] == [0, 2]


def test_selftest_passes(capsys):
    code, out, _ = run(capsys, "selftest")
    assert code == 0
    assert "FAIL" not in out


# ---------------------------------------------------------------- exit codes


def test_computational_failure_exits_1(tmp_path, capsys):
    # the identity path is degenerate at t = 1, so its Conley-Zehnder index is undefined
    path = tmp_path / "id.csv"
    ts = np.linspace(0, 1, 11)
    np.savetxt(path, np.column_stack([ts, np.tile(np.eye(2).ravel(), (11, 1))]), delimiter=",")
    code, _, err = run(capsys, "cz", "--path", path)
    assert code == 1 and "DegenerateEndpointError" in err


@pytest.mark.parametrize(
    "text, needle",
    [
        ("[system]\npreset = harmonic\nomgea = 3\n", ":3: unknown key 'omgea'"),
        ("[system]\npreset = harmonic\n\n[solvr]\nstep = 1e-3\n", ":4: unknown section [solvr]"),
        ("[solver]\nseeds = 10\nstep = fast\n", ":3: cannot parse solver.step"),
        ("[solver]\ntol = -1e-9\n", "solver.tol must be positive"),
        ("[system]\npreset = spinning-top\n", "unknown system preset"),
        ("[boundary]\ntype = dirichlet\nwinding = 1\n", "needs a periodic system"),
        ("no section header\n", "config"),
    ],
)
def test_config_errors_exit_2(tmp_path, capsys, text, needle):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(text)
    code, _, err = run(capsys, "verify-index", "--config", cfg)
    assert code == 2 and needle in err


def test_usage_errors_exit_2(capsys, tmp_path):
    assert run(capsys, "no-such-command")[0] == 2
    assert run(capsys, "maslov")[0] == 2
    assert run(capsys, "solve-bvp", "--config", tmp_path / "missing.ini")[0] == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("t,a\n0,1\n1,x\n")
    assert run(capsys, "maslov", "--path", bad)[0] == 2


def test_parse_config_values():
    cfg = parse_config(
        "[system]\npreset = magnetic\nb = 1.5\n\n[boundary]\ntype = custom\nmatrix = 1 0 0 0; 0 1 0 0\n"
        "[index]\nomegas = 1, 2,4\n[morse]\nclasses = -1,0,1\n"
    )
    assert cfg.get("system", "b") == 1.5
    assert cfg.get("boundary", "matrix") == [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]
    assert cfg.get("index", "omegas") == [1.0, 2.0, 4.0]
    assert cfg.get("morse", "classes") == [-1, 0, 1]
    with pytest.raises(ConfigError):
        cfg.merged({("solver", "unknown"): 1})
