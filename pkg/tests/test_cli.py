import csv
import dataclasses
import io
import json
import subprocess
import sys

import pytest

from islm.cli import run
from islm.econ_model import default_kaldor
from islm.report import ISOCLINE_COLUMNS, SWEEP_COLUMNS, TRAJECTORY_COLUMNS

from conftest import kaldor_with


@pytest.fixture
def write_cfg(tmp_path):
    def _write(cfg, name="cfg.json"):
        path = tmp_path / name
        path.write_text(cfg.to_json())
        return str(path)
    return _write


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


def _csv(path):
    return list(csv.reader(io.StringIO(path.read_text())))


def test_verify_passes_default(tmp_path, write_cfg):
    out = tmp_path / "o"
    assert run(["verify", "--config", write_cfg(default_kaldor()), "--out", str(out)]) == 0
    assert json.loads((out / "verify.json").read_text())["violations"] == []
    assert _manifest(out)["outputs"] == [str(out / "verify.json")]


def test_malformed_json_reports_location(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"alpha": 1.0,\n  oops}\n')
    out = tmp_path / "o"
    assert run(["verify", "--config", str(bad), "--out", str(out)]) == 3
    assert "bad.json:2:" in _manifest(out)["error"]
    assert "malformed JSON" in capsys.readouterr().err


def test_unknown_field_is_a_usage_error(tmp_path):
    doc = json.loads(default_kaldor().to_json())
    doc["gamma"] = 2.0
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    out = tmp_path / "o"
    assert run(["equilibria", "--config", str(path), "--out", str(out)]) == 3
    assert "gamma" in _manifest(out)["error"]


def test_violated_condition_exits_one(tmp_path, write_cfg):
    cfg = default_kaldor()
    cfg = dataclasses.replace(cfg, save=dataclasses.replace(cfg.save, s=1.2))
    out = tmp_path / "o"
    assert run(["verify", "--config", write_cfg(cfg), "--out", str(out)]) == 1
    rep = json.loads((out / "verify.json").read_text())
    assert "4" in [v["condition"] for v in rep["violations"]]
    assert _manifest(out)["status"] == "ConditionViolation"


def test_captured_cycle_exits_two(tmp_path, write_cfg):
    out = tmp_path / "o"
    assert run(["cycle", "--config", write_cfg(kaldor_with(m_s=0.6)), "--out", str(out)]) == 2
    m = _manifest(out)
    assert m["status"] == "NoCycle" and m["exit_code"] == 2


def test_zero_ratio_cycle_is_a_usage_error(tmp_path, write_cfg):
    out = tmp_path / "o"
    code = run(["cycle", "--config", write_cfg(default_kaldor()), "--out", str(out),
                "--epsilon", "0"])
    assert code == 3


def test_unknown_subcommand_exits_three():
    assert run(["explode", "--config", "x.json"]) == 3


def test_missing_required_option_exits_three(write_cfg):
    assert run(["simulate", "--config", write_cfg(default_kaldor())]) == 3


def test_isocline_csv_contract(tmp_path, write_cfg):
    out = tmp_path / "o"
    assert run(["isoclines", "--config", write_cfg(default_kaldor()), "--out", str(out)]) == 0
    for name in ("isocline_is.csv", "isocline_lm.csv"):
        rows = _csv(out / name)
        assert tuple(rows[0]) == ISOCLINE_COLUMNS
        assert len(rows) > 10
    labels = {r[4] for r in _csv(out / "isocline_is.csv")[1:]}
    assert labels == {"A1", "A2", "A3"}


def test_trajectory_csv_round_trips_floats(tmp_path, write_cfg):
    from islm.econ_model import State
    from islm.slowfast import integrate

    cfg = default_kaldor()
    out = tmp_path / "o"
    assert run(["simulate", "--config", write_cfg(cfg), "--out", str(out),
                "--y0", "2", "--r0", "2", "--t-end", "50"]) == 0
    rows = _csv(out / "trajectory.csv")
    assert tuple(rows[0]) == TRAJECTORY_COLUMNS
    tr = integrate(State(2.0, 2.0), cfg, 50.0)
    assert [float(r[1]) for r in rows[1:]] == list(tr.y)
    assert {r[6] for r in rows[1:]} <= {"0", "1"}


def test_sweep_outputs(tmp_path, write_cfg):
    out = tmp_path / "o"
    assert run(["sweep", "--config", write_cfg(default_kaldor()), "--out", str(out),
                "--parameter", "MonetaryMS", "--start", "1.0", "--stop", "1.04",
                "--step", "0.01"]) == 0
    rows = _csv(out / "sweep.csv")
    assert tuple(rows[0]) == SWEEP_COLUMNS
    doc = json.loads((out / "sweep.json").read_text())
    assert max(doc["counts"]) == 3 and len(doc["folds"]) == 2
    assert sorted(_manifest(out)["outputs"]) == sorted(
        [str(out / "sweep.csv"), str(out / "sweep.json")])


def test_sweep_refuses_slow_parameter(tmp_path, write_cfg):
    out = tmp_path / "o"
    assert run(["sweep", "--config", write_cfg(default_kaldor()), "--out", str(out),
                "--parameter", "Slow", "--start", "1", "--stop", "2", "--step", "0.5"]) == 3


def test_console_script_runs(tmp_path, write_cfg):
    proc = subprocess.run(
        [sys.executable, "-m", "islm.cli", "equilibria", "--config", write_cfg(default_kaldor()),
         "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0
    doc = json.loads((tmp_path / "o" / "equilibria.json").read_text())
    assert doc["equilibria"][0]["kind"] == "UnstableNode"
