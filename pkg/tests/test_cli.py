import json
import subprocess
import sys

import numpy as np
import pytest

from pulseforge import cli
from pulseforge import io as pio
from pulseforge.invariants import InvariantTrajectory, TimeGrid


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_angle():
    assert cli.parse_angle("pi/2") == pytest.approx(np.pi / 2)
    assert cli.parse_angle("-0.25*pi + 1") == pytest.approx(1 - np.pi / 4)
    with pytest.raises(Exception):
        cli.parse_angle("__import__('os')")


def test_usage_errors_exit_64():
    with pytest.raises(SystemExit) as exc:
        cli.main(["bogus"])
    assert exc.value.code == 64
    with pytest.raises(SystemExit) as exc:
        cli.main(["pulse", "--kind", "knill"])
    assert exc.value.code == 64
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 64


def test_calibrate(capsys, tmp_path):
    code, out, _ = run(capsys, "calibrate", "--case", "A")
    assert code == 0
    rep = json.loads(out)
    assert rep["amplitude"] == pytest.approx(0.0065175, rel=1e-4)
    assert rep["naive_infidelity"] == pytest.approx(0.1, rel=1e-10)


def test_pulse_then_evaluate(capsys, tmp_path):
    path = tmp_path / "naive.csv"
    assert run(capsys, "pulse", "--kind", "naive", "--theta", "pi/2", "--out", str(path))[0] == 0
    ff = tmp_path / "ff"
    code, out, _ = run(capsys, "evaluate", str(path), "--case", "A", "--ff-dir", str(ff),
                       "--omegas", "20")
    assert code == 0
    rep = json.loads(out)
    assert rep["robust"] == {"detuning": False, "amplitude": False}
    assert rep["infidelity"]["total"] == pytest.approx(0.1, rel=1e-3)
    assert rep["zxz"]["theta"] == pytest.approx(np.pi / 2, abs=1e-8)
    assert sorted(p.name for p in ff.iterdir()) == ["ff_amplitude.csv", "ff_detuning.csv"]


def test_evaluate_pulse_json(capsys, tmp_path):
    path = tmp_path / "bb1.json"
    run(capsys, "pulse", "--kind", "bb1", "--export", "json", "--out", str(path))
    code, out, _ = run(capsys, "evaluate", str(path))
    assert code == 0 and json.loads(out)["robust"]["amplitude"] is True


def test_evaluate_great_circle_trajectory(capsys, tmp_path):
    n = 401
    grid = TimeGrid(2 * np.pi, n)
    t = grid.times
    tr = InvariantTrajectory.from_angles(grid, np.full(n, np.pi / 2), np.zeros(n), t)
    path = tmp_path / "circle.csv"
    pio.trajectory_to_csv(tr, path)
    code, out, _ = run(capsys, "evaluate", str(path))
    assert code == 0 and json.loads(out)["robust"]["detuning"] is True


def test_evaluate_malformed_csv_names_column(capsys, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,omega,phi,delta\n0,1,0,0\n1,oops,0,0\n")
    code, _, err = run(capsys, "evaluate", str(path))
    assert code == 64
    assert "column 'omega'" in err


def test_evaluate_noise_spec_file(capsys, tmp_path):
    spec = [{"id": "d", "psd": {"kind": "delta", "weight": 0.01}}]
    noise = tmp_path / "noise.json"
    noise.write_text(json.dumps(spec))
    pulse = tmp_path / "p.csv"
    run(capsys, "pulse", "--out", str(pulse))
    code, out, _ = run(capsys, "evaluate", str(pulse), "--noise", str(noise))
    assert code == 0 and "d" in json.loads(out)["infidelity"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps([{"id": "d", "psd": {"kind": "pink"}}]))
    assert run(capsys, "evaluate", str(pulse), "--noise", str(bad))[0] == 64
    assert run(capsys, "evaluate", str(pulse), "--noise", str(noise), "--case", "A")[0] == 64


def test_compare_table(capsys, tmp_path):
    csv_path = tmp_path / "table.csv"
    code, out, _ = run(capsys, "compare", "--case", "A", "--csv", str(csv_path))
    assert code == 0
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "pulse,infidelity,robust_detuning,robust_amplitude"
    rows = {l.split(",")[0]: l.split(",") for l in lines[1:]}
    assert set(rows) == {"naive", "short_corpse", "bb1", "cinbb", "cinsk"}
    assert float(rows["naive"][1]) == pytest.approx(0.1, rel=1e-10)
    assert rows["cinbb"][2:] == ["1", "1"]
    assert "cinbb" in out


def test_compare_warns_on_missing_trained(capsys, tmp_path):
    with pytest.warns(UserWarning, match="not found"):
        code, out, _ = run(capsys, "compare", "--case", "B", "--trained",
                           str(tmp_path / "missing.csv"))
    assert code == 0 and "dnn" not in out


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"case": "B", "target": 0.2}))
    code, out, _ = run(capsys, "--config", str(cfg), "calibrate")
    rep = json.loads(out)
    assert code == 0 and rep["case"] == "B" and rep["target"] == 0.2
    code, out, _ = run(capsys, "--config", str(cfg), "calibrate", "--case", "A")
    assert json.loads(out)["case"] == "A"
    cfg.write_text("[1, 2]")
    assert run(capsys, "--config", str(cfg), "calibrate")[0] == 64


def test_threads_flag(capsys, monkeypatch):
    monkeypatch.delenv("PULSEFORGE_THREADS", raising=False)
    assert run(capsys, "--threads", "0", "calibrate")[0] == 64
    assert run(capsys, "--threads", "2", "calibrate")[0] == 0
    import os
    assert os.environ["PULSEFORGE_THREADS"] == "2"


def test_verify_passes_and_reports(capsys, tmp_path):
    out = tmp_path / "report.json"
    code, _, _ = run(capsys, "verify", "--check", "ff_oracle", "--check", "composite_flags",
                     "--quick", "--out", str(out))
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["passed"] and [c["name"] for c in rep["checks"]] == ["ff_oracle",
                                                                    "composite_flags"]


def test_verify_tight_tolerance_fails(capsys):
    code, out, _ = run(capsys, "verify", "--check", "ff_oracle", "--quick",
                       "--tol", "ff_oracle=1e-12")
    assert code == 3
    assert json.loads(out)["passed"] is False


def test_verify_mutation_caught(capsys):
    code, out, _ = run(capsys, "verify", "--check", "ff_oracle", "--quick", "--mutate", "lambda22")
    assert code == 3
    assert json.loads(out)["checks"][0]["error"] > 1e-2


def test_verify_bad_tolerance(capsys):
    assert run(capsys, "verify", "--tol", "ff_oracle")[0] == 64
    assert run(capsys, "verify", "--tol", "nope=1")[0] == 64
    assert run(capsys, "verify", "--check", "nope")[0] == 64


def test_synthesize_short_run_is_infeasible(capsys, tmp_path):
    out = tmp_path / "synth"
    code, stdout, _ = run(capsys, "synthesize", "--case", "B", "--restarts", "1", "--iters", "1",
                          "--out", str(out))
    assert code == 2
    names = sorted(p.name for p in out.iterdir())
    assert names == ["ff_amplitude.csv", "ff_detuning.csv", "pulse.csv", "result.json",
                     "trajectory.csv", "trajectory.json"]
    res = json.loads((out / "result.json").read_text())
    assert res["feasible"] is False and len(res["params"]) == 1186


def test_entry_point_module():
    proc = subprocess.run([sys.executable, "-m", "pulseforge.cli", "pulse", "--kind", "naive",
                           "--resolution", "4"], capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[:2] == ["# hold=true", "t,omega,phi,delta"]
