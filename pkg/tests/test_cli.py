import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from distincompat import cli
from distincompat.bell import AVG_CHSH_QUANTUM
from distincompat.incompat import SolverFailure
from distincompat.mub import build_mub
from distincompat.solver import SolverResult


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_incompat_csv_matches_closed_form(capsys):
    code, out, _ = run(["incompat", "--d", "2", "--m", "3", "--eta-grid", "0.5", "1", "3"], capsys)
    assert code == 0
    r = rows(out)
    assert [float(x["eta"]) for x in r] == [0.5, 0.75, 1.0]
    assert all(float(x["abs_err"]) < 1e-6 for x in r)


def test_output_is_deterministic_and_job_independent(tmp_path):
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    base = ["gain", "--d", "2", "--m", "3", "--eta-grid", "0.6", "1", "3"]
    assert cli.main(base + ["--out", str(a)]) == 0
    assert cli.main(base + ["--out", str(b)]) == 0
    assert cli.main(base + ["--out", str(c), "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()


def test_config_defaults_and_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"d": 3, "m": 2, "eta": 0.9}))
    code, out, _ = run(["incompat", "--config", str(cfg)], capsys)
    assert code == 0 and rows(out)[0]["d"] == "3"
    code, out, _ = run(["incompat", "--config", str(cfg), "--d", "2"], capsys)
    assert code == 0 and rows(out)[0]["d"] == "2"
    cfg.write_text(json.dumps({"no_such_option": 1}))
    code, _, err = run(["incompat", "--config", str(cfg)], capsys)
    assert code == 4 and "no_such_option" in json.loads(err)["message"]


@pytest.mark.parametrize("argv", [
    ["incompat", "--d", "4", "--m", "2"],
    ["incompat", "--eta", "1.5"],
    ["incompat", "--tol", "1e-10"],
    ["incompat", "--eta", "abc"],
    ["bounds", "--subset", "0,1,2"],
    ["decompose", "--m", "2"],
    ["incompat", "--scenario", "file"],
    ["no-such-command"],
])
def test_input_errors_exit_4_with_json(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 4
    data = json.loads(err)
    assert data["exit_code"] == 4 and data["message"]


def test_bound_violation_exit_2(monkeypatch, capsys):
    real = cli.incompatibility

    def off_by_a_bit(M, **kw):
        rep = real(M, **kw)
        rep.value += 1e-3
        return rep
    monkeypatch.setattr(cli, "incompatibility", off_by_a_bit)
    code, out, _ = run(["incompat", "--d", "2", "--m", "2"], capsys)
    assert code == 2
    assert float(rows(out)[0]["abs_err"]) > 1e-4


def test_solver_failure_exit_3(monkeypatch, capsys):
    def fail(M, **kw):
        res = SolverResult("max-iterations", np.nan, np.nan, np.nan, np.zeros(0), np.zeros(0))
        raise SolverFailure("incompatibility", res)
    monkeypatch.setattr(cli, "incompatibility", fail)
    code, _, err = run(["incompat"], capsys)
    assert code == 3
    assert json.loads(err)["diagnostics"]["status"] == "max-iterations"


def test_file_scenario_roundtrip(tmp_path, capsys):
    f = tmp_path / "M.json"
    f.write_text(build_mub(2, 2).assemblage(0.9).to_json())
    code, out, _ = run(["incompat", "--scenario", "file", "--file", str(f)], capsys)
    assert code == 0
    assert abs(float(rows(out)[0]["I"]) - (0.9 + 0.05 - (1 + 1 / np.sqrt(2)) / 2)) < 1e-6


def test_mub_json(capsys):
    code, out, _ = run(["mub", "--d", "3", "--m", "2"], capsys)
    data = json.loads(out)
    assert code == 0 and data["max_overlap_error"] < 1e-12
    assert abs(data["eta_star"] - 0.5 * (1 + 1 / (1 + np.sqrt(3)))) < 1e-12


def test_bounds_and_decompose(capsys):
    code, out, _ = run(["bounds", "--subset", "0,1"], capsys)
    assert code == 0 and "avg_upper_slack" in out
    code, out, _ = run(["decompose", "--eta", "0.95"], capsys)
    assert code == 0 and json.loads(out)["slack"] >= -1e-6


def test_steering_and_nonlocality(capsys, tmp_path):
    code, out, _ = run(["steering", "--visibility", "0.9"], capsys)
    data = json.loads(out)
    assert code == 0 and data["I_minus_S"] >= -1e-6
    code, out, _ = run(["nonlocality", "--m", "3"], capsys)
    assert code == 0 and json.loads(out)["nonlocality"]["value"] > 0
    f = tmp_path / "q.json"
    f.write_text(json.dumps({"q": np.full((2, 2, 2, 2), 0.25).tolist()}))
    code, out, _ = run(["nonlocality", "--behavior", str(f)], capsys)
    assert code == 0 and json.loads(out)["nonlocality"]["value"] < 1e-7


def test_chsh_with_witness(tmp_path, capsys):
    w = tmp_path / "w.json"
    code, out, _ = run(["chsh", "--restarts", "4", "--witness", str(w)], capsys)
    r = rows(out)[0]
    assert code == 0
    assert abs(float(r["best"]) - AVG_CHSH_QUANTUM) < 1e-6
    assert abs(float(r["no_signaling"]) - 10 / 3) < 1e-6
    assert len(json.loads(w.read_text())["alice"]) == 3


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "distincompat", "mub", "--d", "2", "--m", "2"],
                       capture_output=True, text=True)
    assert p.returncode == 0
    assert json.loads(p.stdout)["d"] == 2
