import csv
import io
import json
import subprocess
import sys

import pytest

from ncva import __version__
from ncva.cli import main

from conftest import CONFIGS

T1 = str(CONFIGS / "table1.json")
T42 = str(CONFIGS / "table1_4p2.json")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _csv_rows(text):
    lines = text.splitlines()
    assert lines[-1] == f"# ncva {__version__}"
    return list(csv.DictReader(io.StringIO("\n".join(lines[:-1]))))


def test_tune_collocated(capsys):
    code, out, _ = run(capsys, "--config", T1, "tune", "--n", "1", "--f", "4.2",
                       "--family", "neg", "--k", "1")
    rec = json.loads(out)
    assert code == 0
    assert rec["g"] == pytest.approx(-65.34, abs=0.005)
    assert rec["tau"] == pytest.approx(0.3263, abs=5e-5)
    assert rec["omega_hz"] == 4.2 and rec["omega_rad_s"] == pytest.approx(26.3894, abs=1e-4)
    assert rec["residual"] <= 1e-10


def test_tune_csv_high_band(capsys):
    code, out, _ = run(capsys, "tune", "--config", T1, "--format", "csv", "--n", "2", "--f", "8.3")
    row, = _csv_rows(out)
    assert code == 0
    assert float(row["g"]) == pytest.approx(-688.13, abs=0.005)
    assert float(row["tau"]) == pytest.approx(0.0073, abs=5e-5)


def test_tune_enumeration(capsys):
    code, out, _ = run(capsys, "--config", T1, "tune", "--f", "4.2", "--k-max", "1")
    assert code == 0 and len(json.loads(out)) == 4


def test_tune_degenerate_exit_code(capsys, tmp_path):
    cfg = json.loads((CONFIGS / "table1.json").read_text())
    cfg["absorber"]["c"] = 0.0
    path = tmp_path / "undamped.json"
    path.write_text(json.dumps(cfg))
    f_a = (407 / 0.520) ** 0.5 / (2 * 3.141592653589793)
    code, _, err = run(capsys, "--config", str(path), "tune", "--n", "1", "--f", repr(f_a))
    assert code == 2 and "degenerate: zero gain" in err


def test_sweep_requires_targets(capsys):
    code, _, err = run(capsys, "--config", T1, "sweep", "--n")
    assert code == 1 and "target" in err


def test_sweep_outputs_and_determinism(capsys, tmp_path):
    args = ["--config", T1, "sweep", "--n", "1", "2", "3", "--k", "0", "1",
            "--grid", "4.0", "4.4", "0.05", "--assign", "1:1", "2:0", "3:0"]
    assert run(capsys, "--out", str(tmp_path / "a"), *args)[0] == 0
    assert run(capsys, "--out", str(tmp_path / "b"), *args)[0] == 0
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep.csv").read_bytes()
    rows = _csv_rows(a.decode())
    assert list(rows[0]) == ["omega_hz", "family", "k", "g", "tau", "alpha_rs", "alpha_os",
                             "admissible", "target"]
    assert len(rows) == 3 * 2 * 9
    report = json.loads((tmp_path / "a" / "sweep_intervals.json").read_text())
    (lo, hi), = report["intersection"]["assigned"]
    assert lo == pytest.approx(4.13, abs=0.15) and hi == pytest.approx(4.22, abs=0.15)
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["command"] == "sweep" and manifest["version"] == __version__
    assert {p.split("/")[-1] for p in manifest["outputs"]} == {
        "sweep.csv", "sweep_intervals.json", "manifest.json"}


def test_bode_passive_curve(capsys):
    code, out, _ = run(capsys, "--config", T1, "--format", "csv", "bode", "--n", "1")
    rows = _csv_rows(out)
    assert code == 0 and len(rows) == 1000
    assert rows[0]["mode"] == "passive" and rows[0]["target"] == "1"
    assert float(rows[0]["omega_hz"]) == pytest.approx(2.0)


def test_bode_tuned_point_query(capsys):
    code, out, _ = run(capsys, "--config", T1, "bode", "--n", "3", "--mode", "tuned",
                       "--f", "4.2", "--at", "4.2")
    rec = json.loads(out)
    assert code == 0 and rec["relative"] <= 1e-10
    assert "omega_rad_s" in rec


def test_bode_tuned_needs_frequency(capsys):
    assert run(capsys, "--config", T1, "bode", "--mode", "tuned")[0] == 1


def test_simulate_zero_force_smoke(capsys, tmp_path):
    cfg = json.loads((CONFIGS / "table1_4p2.json").read_text())
    cfg["scenario"].update(force={"F": 0.0, "omega_hz": 4.2}, duration=0.5,
                           segments=[{"t_start": 0.1, "t_end": 0.4, "n": 2, "k": 0}])
    path = tmp_path / "zero.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    code, _, _ = run(capsys, "--config", str(path), "--out", str(out), "simulate")
    assert code == 0
    rows = _csv_rows((out / "trace.csv").read_text())
    assert list(rows[0]) == ["t", "x_a", "x_1", "x_2", "x_3", "u", "f", "segment_id"]
    assert all(float(r["x_3"]) == 0.0 for r in rows)
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["segments"][0]["mode"] == "tuned"
    assert metrics["force"]["omega_rad_s"] == pytest.approx(26.3894, abs=1e-4)


def test_simulate_window_metrics(capsys, tmp_path):
    cfg = json.loads((CONFIGS / "table1_4p2.json").read_text())
    cfg["scenario"].update(duration=20.0, segments=[{"t_start": 12, "t_end": 20, "n": 2, "k": 0}])
    path = tmp_path / "short.json"
    path.write_text(json.dumps(cfg))
    code, out, _ = run(capsys, "--config", str(path), "simulate", "--dt", "2e-4")
    m = json.loads(out)
    assert code == 0
    modes = [(w["window"], w["mode"]) for w in m["windows"]]
    assert modes == [([7.0, 12.0], "passive"), ([15.0, 20.0], "tuned")]
    assert set(m["windows"][0]["amplitude_m"]) == {"x_a", "x_1", "x_2", "x_3"}


def test_simulate_divergence_exit_code(capsys, tmp_path):
    cfg = json.loads((CONFIGS / "table1.json").read_text())
    cfg["scenario"] = {"force": {"F": 3.0, "omega_hz": 4.2}, "duration": 200.0, "dt": 1e-3,
                       "segments": [{"t_start": 0, "t_end": 200, "g": 5000.0, "tau": 1.4}]}
    path = tmp_path / "unstable.json"
    path.write_text(json.dumps(cfg))
    code, _, err = run(capsys, "--config", str(path), "simulate")
    assert code == 3 and "diverged" in err and "t=" in err


def test_verify_table1_passes(capsys):
    code, out, _ = run(capsys, "--config", T42, "verify")
    rep = json.loads(out)
    assert code == 0 and rep["passed"]
    names = " ".join(c["check"] for c in rep["checks"])
    assert "transfer zeros" in names and "pencil" in names


def test_verify_deployment_error(capsys, tmp_path):
    cfg = json.loads((CONFIGS / "table1.json").read_text())
    cfg["p"] = 2
    path = tmp_path / "p_gt_n.json"
    path.write_text(json.dumps(cfg))
    code, _, err = run(capsys, "--config", str(path), "verify", "--f", "4.2")
    assert code == 1 and "p <= n" in err


def test_verify_schema_error(capsys, tmp_path):
    cfg = json.loads((CONFIGS / "table1.json").read_text())
    cfg["masses"][0] = -1.0
    path = tmp_path / "neg.json"
    path.write_text(json.dumps(cfg))
    code, _, err = run(capsys, "--config", str(path), "verify", "--f", "4.2")
    assert code == 1 and "masses[0]" in err


def test_usage_errors_exit_one(capsys):
    assert run(capsys, "tune", "--f", "4.2")[0] == 1  # no --config
    with pytest.raises(SystemExit) as info:
        main(["tune", "--bogus"])
    assert info.value.code == 1


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "ncva.cli", "--config", T1, "tune", "--f", "4.2",
                          "--n", "2"], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["g"] == pytest.approx(-124.14, abs=0.005)
