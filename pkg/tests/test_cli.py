import json
import os
import subprocess
import sys

import pytest

from bellcv.cli import run


def run_json(capsys, argv):
    code = run(argv)
    out = capsys.readouterr().out
    assert code == 0, out
    return json.loads(out)


def test_eval_cfrd(capsys):
    doc = run_json(capsys, ["eval", "--family", "cfrd", "--state", "ghz:10,5"])
    assert doc["bell"] == pytest.approx(0.25 * (4 / 3) ** 5, abs=1e-10)
    assert doc["violated"] is True


def test_eval_functional_auto(capsys):
    doc = run_json(capsys, ["eval", "--family", "functional", "--state", "ghz:6,3",
                            "--function", "rational(auto)", "--eta", "0.8"])
    assert doc["function"] == "auto"
    assert doc["resolved_function"].startswith("rational(")


def test_eval_named_state_and_csv(capsys):
    assert run(["eval", "--family", "mabk", "--state", "cluster4", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("family,N,r")
    assert lines[1].startswith("mabk,4")


def test_eval_with_verify(capsys):
    doc = run_json(capsys, ["eval", "--family", "mabk", "--state", "ghz:3,1", "--verify"])
    assert doc["crosscheck"]["passed"] is True


def test_eval_optimize(capsys):
    doc = run_json(capsys, ["eval", "--family", "mabk", "--state", "ghz:3,1", "--angles", "optimize"])
    assert doc["bell"] == pytest.approx(2 * (2 / 3.141592653589793) ** 1.5, abs=1e-8)


def test_eval_angles_file(tmp_path, capsys):
    path = tmp_path / "a.json"
    path.write_text(json.dumps([[0, -1.5707963267948966], [0, 1.5707963267948966]]))
    doc = run_json(capsys, ["eval", "--family", "cfrd", "--state", "ghz:2,1", "--angles", str(path)])
    assert doc["bell"] == pytest.approx(1 / 3)


def test_eval_state_file(tmp_path, capsys):
    doc = {"modes": 2, "terms": [{"amp": [0.6, 0], "occ": [0, 1]}, {"amp": [0.8, 0], "occ": [1, 0]}]}
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    code = run(["eval", "--family", "cfrd", "--state-file", str(path)])
    out = capsys.readouterr()
    assert code == 0, out.err
    assert json.loads(out.out)["lhs"] == pytest.approx(0.48 ** 2, abs=1e-12)


def test_threshold(capsys):
    doc = run_json(capsys, ["threshold", "--family", "mabk", "--state", "ghz:3,1"])
    assert doc["eta_crit"] == pytest.approx(0.98954, abs=1e-5)
    doc = run_json(capsys, ["threshold", "--family", "functional", "--state", "ghz:10,5",
                            "--function", "rational(auto)", "--analytic"])
    assert doc["eta_crit"] == pytest.approx(0.8025, abs=1e-4)
    assert doc["eta_crit_analytic"] == pytest.approx(0.80711, abs=1e-4)


def test_threshold_without_violation(capsys):
    doc = run_json(capsys, ["threshold", "--family", "cfrd", "--state", "ghz:4,2"])
    assert doc["eta_crit"] is None and doc["violation"] is False


def test_solve_epsilon(capsys):
    doc = run_json(capsys, ["solve-epsilon"])
    assert doc["epsilon"] == pytest.approx(2.96483621787, abs=1e-9)
    doc = run_json(capsys, ["solve-epsilon", "--parity", "odd", "--N", "5", "--eta", "0.9"])
    assert doc["epsilon"] == pytest.approx(3.22117, abs=1e-5)
    assert "epsilon_eta_closed" in doc
    doc = run_json(capsys, ["solve-epsilon", "--eta", "0.5"])
    assert doc["epsilon_eta"] == pytest.approx(1.194333946887929, abs=1e-10)


def test_crosscheck(capsys):
    doc = run_json(capsys, ["crosscheck", "--family", "functional", "--state", "ghz:2,1",
                            "--function", "tanh(4,1.4)", "--oracle-grid", "151"])
    assert doc["passed"] is True


def test_sweep(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"family": "mabk", "N_range": [1, 4]}))
    out = tmp_path / "rows.json"
    assert run(["sweep", "--spec", str(spec), "--out", str(out)]) == 0
    rows = json.loads(out.read_text())
    assert [r["N"] for r in rows] == [1, 2, 3, 4]


def test_reproduce_deterministic(tmp_path):
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    assert run(["reproduce", "fig-r-sweep", "--out", str(a)]) == 0
    assert run(["reproduce", "fig-r-sweep", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0].split("\t")[0] == "family"


@pytest.mark.parametrize("argv", [
    ["eval", "--family", "cfrd"],
    ["eval", "--family", "cfrd", "--state", "noon:3"],
    ["eval", "--family", "mabk", "--state", "ghz:3,1", "--function", "x"],
    ["eval", "--family", "cfrd", "--state", "ghz:2,1", "--eta", "1.5"],
    ["solve-epsilon", "--parity", "odd"],
    ["threshold", "--family", "functional", "--state", "ghz:5,2", "--analytic"],
    ["sweep", "--spec", "/nonexistent/spec.json"],
    ["bogus"],
])
def test_usage_errors(argv, capsys):
    assert run(argv) == 2


def test_numerical_failure_exit_code(capsys, monkeypatch):
    from bellcv import cli
    from bellcv.quadrature import ConvergenceError

    def boom(args):
        raise ConvergenceError("forced")

    monkeypatch.setitem(cli.COMMANDS, "solve-epsilon", boom)
    assert run(["solve-epsilon"]) == 1
    assert "numerical failure" in capsys.readouterr().err


def test_cache_written(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("BELLCV_CACHE_DIR", str(tmp_path))
    assert run(["eval", "--family", "mabk", "--state", "ghz:2,1"]) == 0
    assert os.path.exists(tmp_path / "kernels.json")


def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "bellcv.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "reproduce" in proc.stdout
