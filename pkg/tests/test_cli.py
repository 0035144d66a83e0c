import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from qloop import dsl, report
from qloop.cli import main
from qloop.function import make_jordan_loop
from qloop.termination import classify_loop


@pytest.fixture(scope="module")
def validator():
    return jsonschema.Draft202012Validator(report.load_schema())


def run(capsys, *argv):
    code = main(list(map(str, argv)))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, validator, *argv):
    code, out, err = run(capsys, *argv, "--json")
    assert code == 0, err
    data = json.loads(out)
    validator.validate(data)
    assert data["schema"] == "qloop/1"
    return data


def test_analyze_h_loop(capsys, validator, fixtures_dir):
    data = run_json(capsys, validator, "analyze", fixtures_dir / "h_loop.ql")
    assert data["verdict"]["kind"] == "AlmostTerminating"
    assert data["input"]["p_nt"] == 0.0
    assert data["input"]["consistency"] < 1e-12
    F = np.array([[complex(*z) for z in row] for row in data["input"]["F"]["matrix"]])
    assert np.allclose(F, np.diag([0, 1]))


def test_analyze_text_output(capsys, fixtures_dir):
    code, out, _ = run(capsys, "analyze", fixtures_dir / "one_qubit_Z.ql")
    assert code == 0
    assert "verdict: NotAlmostTerminating" in out
    assert "p_nt = 0.36" in out


def test_analyze_input_override(capsys, validator, fixtures_dir):
    data = run_json(capsys, validator, "analyze", fixtures_dir / "one_qubit_I.ql", "--input", "|1>")
    assert data["input"]["verdict"] == "Terminates"


def test_analyze_batch(capsys, validator, fixtures_dir):
    code, out, err = run(capsys, "analyze", "--batch", fixtures_dir, "--json", "--jobs", 4)
    assert code == 0, err
    lines = [json.loads(l) for l in out.splitlines()]
    assert len(lines) == len(list(fixtures_dir.glob("*.ql")))
    for rec in lines:
        validator.validate(rec)
    kinds = {rec["source"].rsplit("/", 1)[-1]: rec["verdict"]["kind"] for rec in lines}
    assert kinds["one_qubit_X.ql"] == "Terminating"
    assert kinds["walk_4.ql"] == "AlmostTerminating"


def test_simulate_h_loop_column(capsys, fixtures_dir):
    code, out, _ = run(capsys, "simulate", fixtures_dir / "h_loop.ql", "--steps", 5)
    assert code == 0
    rows = [l.split() for l in out.splitlines()[1:]]
    assert [float(r[3]) for r in rows] == [1, 0.5, 0.25, 0.125, 0.0625]


def test_simulate_json(capsys, validator, fixtures_dir):
    data = run_json(capsys, validator, "simulate", fixtures_dir / "one_qubit_X.ql", "--steps", 10)
    assert data["termination_step"] == 2
    assert data["truncated_at"] == 2


def test_simulate_and_analyze_agree(capsys, validator, fixtures_dir):
    path = fixtures_dir / "euler.ql"
    a = run_json(capsys, validator, "analyze", path)
    s = run_json(capsys, validator, "simulate", path, "--steps", 200)
    assert abs(a["input"]["p_nt"] - s["steps"][-1]["p_NT_cumulative"]) < 1e-6


def test_fn_z_plus(capsys, validator, fixtures_dir):
    code, out, _ = run(capsys, "fn", fixtures_dir / "z_plus.ql")
    assert code == 0
    assert "trace 0.5" in out
    for method in ("series", "solve", "normal"):
        data = run_json(capsys, validator, "fn", fixtures_dir / "z_plus.ql", "--method", method)
        assert data["F"]["trace"] == pytest.approx(0.5)


def test_fn_normal_on_non_normal_loop_is_numerical_failure(capsys, tmp_path):
    loop, _ = make_jordan_loop([(0.5, 2)], np.random.default_rng(0))
    gate = dsl.format_expr(dsl.matrix_expr(loop.U))
    path = tmp_path / "jordan.ql"
    path.write_text(
        f"loop j {{ dims: [4]; gate U = {gate}; measure M = computational; guard X = {{0, 1}}; input: |0>; }}"
    )
    code, _, err = run(capsys, "fn", path, "--method", "normal")
    assert code == 2
    assert "not normal" in err
    assert run(capsys, "fn", path)[0] == 0


def test_validate_good_and_bad(capsys, validator, fixtures_dir, tmp_path):
    code, out, _ = run(capsys, "validate", fixtures_dir / "cnot_10.ql")
    assert code == 0 and out.strip().endswith("ok")
    bad = tmp_path / "bad.ql"
    bad.write_text("loop b {\n  dims: [2];\n  gate U = H;\n  measure M = computational;\n  guard X = {2};\n}\n")
    code, out, _ = run(capsys, "validate", bad)
    assert code == 1
    assert f"{bad}:5:" in out
    code, out, _ = run(capsys, "validate", bad, "--json")
    data = json.loads(out)
    validator.validate(data)
    assert not data["valid"] and data["diagnostics"][0]["line"] == 5


def test_validate_warns_on_trivial_guard(capsys, tmp_path):
    path = tmp_path / "forever.ql"
    path.write_text("loop f { dims: [2]; gate U = H; measure M = computational; guard X = {0, 1}; }")
    code, out, _ = run(capsys, "validate", path)
    assert code == 0
    assert "warning" in out and "forever" in out


@pytest.mark.parametrize("target", ["unitary", "measurement"])
def test_perturb_writes_loadable_loop(capsys, validator, fixtures_dir, tmp_path, target):
    out_file = tmp_path / f"z_{target}.ql"
    data = run_json(
        capsys, validator, "perturb", fixtures_dir / "one_qubit_Z.ql",
        "--eps", 0.2, "--target", target, "--seed", 3, "-o", out_file,
    )
    assert data["distance"] < 0.2
    assert data["verdict"]["kind"] == "AlmostTerminating"
    loop, state = dsl.load(out_file)
    assert loop.name == "one_qubit_Z_perturbed"
    assert classify_loop(loop).almost_terminating
    assert state is not None


def test_perturb_default_output_name(capsys, fixtures_dir, tmp_path):
    src = tmp_path / "z.ql"
    src.write_text((fixtures_dir / "one_qubit_Z.ql").read_text())
    code, out, _ = run(capsys, "perturb", src, "--eps", 0.1, "--target", "unitary")
    assert code == 0
    assert (tmp_path / "z_perturbed.ql").exists()
    assert "distance" in out


def test_perturb_errors(capsys, fixtures_dir, tmp_path):
    code, _, err = run(capsys, "perturb", fixtures_dir / "one_qubit_I.ql", "--eps", 0.2,
                       "--target", "measurement", "-o", tmp_path / "x.ql")
    assert code == 1 and err
    full = tmp_path / "full.ql"
    full.write_text("loop f { dims: [2]; gate U = Z; measure M = computational; guard X = {0, 1}; }")
    code, _, _ = run(capsys, "perturb", full, "--eps", 0.2, "--target", "unitary")
    assert code == 1
    code, _, _ = run(capsys, "perturb", fixtures_dir / "one_qubit_Z.ql", "--eps", -1, "--target", "unitary")
    assert code == 1


def test_walk_command(capsys, tmp_path):
    path = tmp_path / "w.ql"
    code, _, _ = run(capsys, "walk", "--n", 5, "-o", path)
    assert code == 0
    loop, _ = dsl.load(path)
    assert loop.dim == 10
    assert classify_loop(loop).kind == "AlmostTerminating"
    code, _, _ = run(capsys, "walk", "--n", 2, "-o", path)
    assert code == 1


def test_usage_errors_exit_one(capsys, fixtures_dir, tmp_path):
    assert run(capsys)[0] == 1
    assert run(capsys, "simulate")[0] == 1
    assert run(capsys, "fn", fixtures_dir / "h_loop.ql", "--method", "magic")[0] == 1
    assert run(capsys, "analyze", tmp_path / "missing.ql")[0] == 1
    nostate = tmp_path / "n.ql"
    nostate.write_text("loop n { dims: [2]; gate U = H; measure M = computational; guard X = {0}; }")
    code, _, err = run(capsys, "simulate", nostate)
    assert code == 1 and "input" in err


def test_syntax_error_exit_one(capsys, tmp_path):
    path = tmp_path / "s.ql"
    path.write_text("loop s { gate U = ; }")
    code, _, err = run(capsys, "analyze", path)
    assert code == 1 and "line 1" in err


def test_tolerance_override(capsys, fixtures_dir, monkeypatch):
    monkeypatch.setenv("QLOOP_TOL", "unit=0.5")
    code, out, _ = run(capsys, "analyze", fixtures_dir / "h_loop.ql")
    # with a loose unit threshold 1/sqrt(2) counts as unit modulus
    assert code == 0 and "NotAlmostTerminating" in out
    monkeypatch.setenv("QLOOP_TOL", "bogus=1")
    assert run(capsys, "analyze", fixtures_dir / "h_loop.ql")[0] == 1


def test_module_entry_point(fixtures_dir):
    proc = subprocess.run(
        [sys.executable, "-m", "qloop", "analyze", str(fixtures_dir / "h_loop.ql"), "--json"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["verdict"]["kind"] == "AlmostTerminating"
