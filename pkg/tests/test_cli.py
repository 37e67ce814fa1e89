import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from dmech.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def report(out):
    return json.loads((out / "report.json").read_text())


def test_oscillator_run(tmp_path):
    out = tmp_path / "ho"
    assert main(["run", str(CONFIGS / "harmonic_oscillator.cfg"), "--out-dir", str(out)]) == 0
    traj = rows(out / "trajectory.csv")
    assert traj[0] == ["k", "coord_0"] and len(traj) == 1 + 1002
    res = rows(out / "residuals.csv")
    assert res[0] == ["k", "residual_inf_norm", "newton_iters"] and len(res) == 1 + 1000
    assert max(float(r[1]) for r in res[1:]) <= 1e-10
    assert b"\r\n" not in (out / "trajectory.csv").read_bytes()
    assert report(out)["exit_code"] == 0


def test_reduce_run(tmp_path):
    out = tmp_path / "cf"
    assert main(["run", str(CONFIGS / "central_force_reduce.cfg"), "--out-dir", str(out)]) == 0
    eq = rows(out / "equivalence_report.csv")
    assert eq[0] == ["k", "phi_inf_norm", "psi_inf_norm", "reconstruction_error"]
    assert max(max(float(r[1]), float(r[2])) for r in eq[1:]) <= 1e-8
    assert (out / "reduced.csv").exists() and (out / "momentum.csv").exists()


def test_outputs_are_byte_identical(tmp_path):
    cfg = str(CONFIGS / "damped_particle.cfg")
    assert main(["run", cfg, "--out-dir", str(tmp_path / "a")]) == 0
    assert main(["run", cfg, "--out-dir", str(tmp_path / "b")]) == 0
    for name in ("trajectory.csv", "residuals.csv", "reduced.csv", "equivalence_report.csv", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.parametrize("name,code", [
    ("broken_symmetry", 3),
    ("zero_hessian", 3),
    ("nonholonomic_particle", 0),
    ("two_stage", 0),
    ("custom_pendulum", 0),
])
def test_exit_codes(tmp_path, name, code):
    out = tmp_path / name
    assert main(["run", str(CONFIGS / f"{name}.cfg"), "--out-dir", str(out)]) == code
    assert report(out)["exit_code"] == code


def test_nonholonomic_constraints_file(tmp_path):
    out = tmp_path / "nh"
    main(["run", str(CONFIGS / "nonholonomic_particle.cfg"), "--out-dir", str(out)])
    c = rows(out / "constraints.csv")
    assert c[0] == ["k", "chi_0"] and len(c) == 1 + 501
    assert max(abs(float(r[1])) for r in c[1:]) <= 1e-10


def test_diagnose_builtin_is_clean(tmp_path):
    out = tmp_path / "d"
    assert main(["diagnose", str(CONFIGS / "central_force_reduce.cfg"), "--out-dir", str(out)]) == 0
    rep = report(out)
    assert rep["mode"] == "diagnose" and rep["metrics"]["regular"] is True


def test_solver_failure_exit_code(tmp_path):
    # one Newton iteration cannot reach the tolerance on a nonlinear system
    text = (CONFIGS / "custom_pendulum.cfg").read_text().replace("tol = 1e-9", "tol = 1e-9\nmax_iter = 1")
    cfg = tmp_path / "p.cfg"
    cfg.write_text(text)
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "o")]) == 2


def test_several_configs_get_subdirectories(tmp_path):
    cfgs = [str(CONFIGS / "harmonic_oscillator.cfg"), str(CONFIGS / "damped_particle.cfg")]
    assert main(["run", *cfgs, "--out-dir", str(tmp_path), "--jobs", "2"]) == 0
    assert (tmp_path / "harmonic_oscillator" / "trajectory.csv").exists()
    assert (tmp_path / "damped_particle" / "trajectory.csv").exists()


def test_usage_errors_exit_1(tmp_path):
    for argv in (["run"], ["fly", "x.cfg"], ["run", "x.cfg", "--tol", "-1"]):
        with pytest.raises(SystemExit) as ei:
            main(argv)
        assert ei.value.code == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("[system]\nname = free_particle\n")
    assert main(["run", str(bad), "--out-dir", str(tmp_path / "o")]) == 1


def test_console_script_module(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "dmech.cli", "run", str(CONFIGS / "zero_hessian.cfg"),
                           "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 3
