"""Scenario parsing, validation diagnostics, the batch runner surface and
the CLI exit-code contract."""

import json
import os
import subprocess
import sys

import pytest

from lagflow.cli import main as cli_main
from lagflow.errors import ParseError, ValidationError
from lagflow.scenarios import (BUILTIN_SCENARIOS, build_initial,
                               list_scenarios, load_scenario,
                               parse_scenario_text, run_scenario)


def test_builtin_s1_parses():
    cfg = load_scenario("s1_flat_torus")
    assert cfg.get("ambient.kind") == "flat_torus"
    assert cfg.get("family.amplitude") == 0.01
    assert cfg.get("family.mode") == 1
    assert cfg.get("resolution") == 128


def test_unknown_key_rejected():
    with pytest.raises(ParseError) as ei:
        parse_scenario_text("name = x\nfoo = 1\n")
    assert "foo" in str(ei.value)
    assert "line 2" in str(ei.value)


def test_resolution_validated():
    text = BUILTIN_SCENARIOS["s1_flat_torus"].replace(
        "resolution = 128", "resolution = 8")
    with pytest.raises(ValidationError) as ei:
        parse_scenario_text(text)
    assert any("resolution" in v for v in ei.value.violations)


def test_validation_collects_all_violations():
    with pytest.raises(ValidationError) as ei:
        parse_scenario_text("resolution = 8\nexpect.slope = -1\n")
    msgs = ei.value.violations
    assert len(msgs) >= 3  # missing keys, resolution, slope_tol


def test_family_ambient_mismatch():
    text = ("name = x\nresolution = 32\nambient.kind = round_sphere\n"
            "family.name = flat_graph\n")
    with pytest.raises(ValidationError):
        parse_scenario_text(text)


def test_list_scenarios_catalog():
    names = {e["name"] for e in list_scenarios()}
    assert {"s1_flat_torus", "s2_great_circle", "s3_clifford_cp2",
            "s4_hyperbolic_cylinder", "s5_shrinking_circle"} <= names


def test_build_initial_families():
    for name in ("s1_flat_torus", "s2_great_circle", "s4_hyperbolic_cylinder",
                 "s5_shrinking_circle"):
        cfg = load_scenario(name)
        imm, pot = build_initial(cfg)
        assert imm.topology.shape[0] == cfg.get("resolution")


def test_run_scenario_s5_negative_control(tmp_path):
    cfg = load_scenario("s5_shrinking_circle")
    status, summary = run_scenario(cfg, tmp_path / "out")
    assert status == 0, summary
    assert summary["flow"]["error_type"] == "DegenerateMetric"
    assert 0.018 <= summary["flow"]["t_final"] <= 0.022
    assert (tmp_path / "out" / "trace.csv").exists()
    assert (tmp_path / "out" / "checks.json").exists()
    assert (tmp_path / "out" / "summary.json").exists()


def test_cli_list_and_exit_codes(tmp_path, capsys):
    assert cli_main(["list"]) == 0
    out = capsys.readouterr().out
    assert "s1_flat_torus" in out
    # config error -> 3
    bad = tmp_path / "bad.cfg"
    bad.write_text("name = x\nfoo = 1\n")
    assert cli_main(["run", str(bad), "--out", str(tmp_path / "o")]) == 3
    missing = cli_main(["run", "no_such_scenario", "--out", str(tmp_path / "o2")])
    assert missing == 3


def test_cli_run_and_check_roundtrip(tmp_path, capsys):
    # a cheap graph run via overrides: quick but meaningful trace
    scen = tmp_path / "quick.cfg"
    scen.write_text(
        "name = quick\n"
        "resolution = 64\n"
        "seed = 7\n"
        "ambient.kind = flat_torus\n"
        "ambient.n = 1\n"
        "family.name = flat_graph\n"
        "family.amplitude = 0.01\n"
        "family.mode = 1\n"
        "flow.cfl = 0.8\n"
        "flow.t_max = 0.45\n"
        "flow.monitor_stride = 10\n"
        "flow.eig_stride = 10\n"
        "flow.resid_stride = 10\n"
        "expect.slope = -78.9568\n"
        "expect.slope_tol = 0.12\n"
        "expect.converged = true\n"
        "class.family = A\n"
        "class.kappa = 1.0\n"
        "class.r = 0.3\n"
        "class.lambda = 1.0\n"
        "class.epsilon = 1.0\n")
    out = tmp_path / "run_out"
    status = cli_main(["run", str(scen), "--out", str(out)])
    assert status == 0
    capsys.readouterr()
    status2 = cli_main(["check", str(out / "trace.csv"),
                        "--scenario", str(scen)])
    assert status2 == 0
    shown = capsys.readouterr().out
    assert "decay fit" in shown
    with open(out / "summary.json") as fh:
        summary = json.load(fh)
    assert summary["exit_status"] == 0
    assert any(e["name"] == "decay_slope" and e["pass"]
               for e in summary["expectations"])
    snaps = os.listdir(out / "snapshots")
    assert snaps and all(s.endswith(".csv") for s in snaps)
    with open(out / "snapshots" / sorted(snaps)[0]) as fh:
        header = fh.readline().strip()
    assert header == "u1,x1,x2,abs_h,abs_a,defect"


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lagflow.cli", "list"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "s3_clifford_cp2" in proc.stdout
