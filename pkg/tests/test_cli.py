import json
import math

import pytest

from multiradial import cli
from multiradial.path_model import DrivingPath


def run(*argv):
    return cli.main(list(argv))


def test_flow_rate_for_two_particles(tmp_path):
    assert run("flow", "--out-dir", str(tmp_path), "--set", "flow.theta0=0, pi/2") == 0
    rep = json.loads((tmp_path / "convergence.json").read_text())
    assert rep["rate_reliable"]
    assert abs(rep["fitted_rate"] - 2.0) <= 0.05 * 2.0
    assert len(rep["times"]) == 3001
    assert (tmp_path / "flow_path.csv").exists()


def test_flow_csv_format(tmp_path):
    assert run("flow", "--out-dir", str(tmp_path), "--format", "csv", "--set", "flow.theta0=0, pi/2") == 0
    assert {"flow_path.csv", "convergence.csv", "convergence_summary.csv"} <= {p.name for p in tmp_path.iterdir()}


def test_energy_of_constant_spaced_path(tmp_path):
    src = tmp_path / "p.csv"
    src.write_text(DrivingPath.constant([0.0, 2 * math.pi / 3, 4 * math.pi / 3], 1.0, 0.01).to_csv())
    out = tmp_path / "out"
    assert run("energy", "--out-dir", str(out), "--set", f"energy.path={src}") == 0
    rep = json.loads((out / "energy_report.json").read_text())
    assert rep["dirichlet_E"] == 0.0
    assert abs(rep["multiradial_J"]) <= 1e-12
    assert len(rep["per_interval"]) == 100


def test_trace_of_constant_driver_is_slit(tmp_path):
    assert run("trace", "--out-dir", str(tmp_path), "--set", "trace.theta0=0") == 0
    last = (tmp_path / "trace.csv").read_text().strip().splitlines()[-1].split(",")
    assert float(last[2]) == pytest.approx(0.11416882512791471, abs=1e-6)
    assert abs(float(last[3])) <= 1e-9


@pytest.mark.parametrize("fmt", ["svg", "json"])
def test_hull_formats(tmp_path, fmt):
    assert run("hull", "--out-dir", str(tmp_path), "--format", fmt, "--set", "hull.theta0=0",
               "--set", "hull.radial=16", "--set", "hull.angular=32", "--set", "hull.T=0.2") == 0
    assert (tmp_path / f"hull.{fmt}").exists() and (tmp_path / "hull.csv").exists()


def test_config_errors_report_location(tmp_path, capsys):
    ini = tmp_path / "bad.ini"
    ini.write_text("[run]\nseed = 1\n\n[flow]\nn = 2\nbogus = 3\n")
    assert run("flow", "--config", str(ini), "--out-dir", str(tmp_path / "o")) == 2
    err = capsys.readouterr().err
    assert f"{ini}:6" in err and "bogus" in err
    ini.write_text("[flow]\nn = 2\ntheta0 = 0, x\n")
    assert run("flow", "--config", str(ini), "--out-dir", str(tmp_path / "o")) == 2
    assert f"{ini}:3" in capsys.readouterr().err
    ini.write_text("seed = 1\n")
    assert run("flow", "--config", str(ini), "--out-dir", str(tmp_path / "o")) == 2
    assert not (tmp_path / "o").exists()


def test_bad_values_exit_two(tmp_path):
    o = str(tmp_path / "o")
    assert run("energy", "--out-dir", o, "--format", "svg") == 2
    assert run("flow", "--out-dir", o, "--workers", "0") == 2
    assert run("flow", "--out-dir", o, "--set", "nosection.key=1") == 2
    assert run("ldp", "--out-dir", o, "--set", "ldp.kappas=0.5, 1") == 2
    assert run("energy", "--out-dir", o) == 2
    assert not (tmp_path / "o").exists()


def test_config_file_values_and_precedence(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\nseed = 5\n\n[flow]\ntheta0 = 0, 2pi/3\nT = 1\n")
    out = tmp_path / "o"
    assert run("flow", "--config", str(ini), "--seed", "9", "--out-dir", str(out), "--set", "flow.T=0.5") == 0
    man = json.loads((out / "run_manifest.json").read_text())
    assert man["seed"] == 9
    assert man["config"]["flow"]["T"] == "0.5"
    assert man["config"]["flow"]["theta0"] == "0, 2pi/3"


def test_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENV_OUT_DIR, str(tmp_path / "env"))
    assert run("trace", "--set", "trace.theta0=0", "--set", "trace.samples=3") == 0
    assert (tmp_path / "env" / "trace.csv").exists()


def test_manifest_lists_files(tmp_path):
    assert run("simulate", "--out-dir", str(tmp_path), "--set", "simulate.ensemble=4", "--set", "simulate.T=0.1") == 0
    man = json.loads((tmp_path / "run_manifest.json").read_text())
    assert man["subcommand"] == "simulate" and man["files"]
    for f in man["files"]:
        assert (tmp_path / f).exists()
    assert (tmp_path / "timing.txt").exists()


def _snapshot(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in root.rglob("*") if p.is_file() and p.name != "timing.txt"}


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--set", "simulate.ensemble=6", "--set", "simulate.T=0.2", "--set", "simulate.n=3"],
        ["simulate", "--format", "json", "--set", "simulate.ensemble=3", "--set", "simulate.T=0.1",
         "--set", "simulate.method=weighted", "--set", "simulate.eps=0.3"],
        ["ldp", "--set", "ldp.ensemble=200", "--set", "ldp.kappas=1, 0.5", "--set", "ldp.steps=40",
         "--set", "ldp.starts=2", "--set", "ldp.T=0.2"],
    ],
)
def test_reruns_are_byte_identical(tmp_path, argv):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(*argv, "--seed", "3", "--out-dir", str(a)) == 0
    assert run(*argv, "--seed", "3", "--out-dir", str(b), "--workers", "3") == 0
    sa, sb = _snapshot(a), _snapshot(b)
    # the manifest records the worker count, everything else must match
    sa.pop("run_manifest.json"), sb.pop("run_manifest.json")
    assert sa == sb and sa


def test_check_subset(tmp_path, capsys):
    assert run("check", "--out-dir", str(tmp_path), "--set", "check.only=1, 7") == 0
    out = capsys.readouterr().out
    assert "criterion  1: PASS" in out and "criterion  7: PASS" in out
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert [c["criterion"] for c in summary["criteria"]] == [1, 7]
