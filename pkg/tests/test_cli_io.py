from __future__ import annotations

import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from conftest import SCENARIOS
from hypothesis import given, settings
from hypothesis import strategies as st

from twocycles.cli_io import (
    EXIT_NUMERIC, EXIT_OK, EXIT_SCENARIO, ScenarioError, load_scenario, main, parse_scenario,
)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write(tmp_path, data, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def run_cli(scenario, out, command, *extra):
    return main(["--scenario", str(scenario), "--out", str(out), "--command", command, *extra])


def test_shipped_scenarios_round_trip():
    for path in sorted(SCENARIOS.glob("*.json")):
        sc = load_scenario(path)
        again = parse_scenario(json.loads(sc.dumps()))
        assert again == sc
        assert again.digest() == sc.digest()


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.1, 10), min_size=5, max_size=5), st.sampled_from(["squared", "lengths"]),
       st.floats(-1, 1), st.integers(0, 2**31), st.lists(st.floats(-5, 5), min_size=1, max_size=4))
def test_round_trip_property(values, convention, mu, seed, coeffs):
    data = {"version": 1, "targets": {"values": values, "convention": convention}, "mu": mu,
            "law": {"variant": "shared_scalar_poly", "coefficients": coeffs},
            "search": {"seed": seed}}
    sc = parse_scenario(data)
    assert parse_scenario(json.loads(sc.dumps())) == sc


def test_law_variants_round_trip():
    general = {"variant": "general_poly", "edges": [
        [[0, 0, 1, 0, 0, 1.0], [0, 0, 1, 0, 1, 0.5]], [[0, 1, 1.0]], [[0, 1, 2.0]], [[0, 1, 1.0]],
        [[0, 0, 0, 1, 0, 1.0]]]}
    linear = {"variant": "per_edge_linear", "gains": {"k2": 2.0, "k12": 0.1}}
    for law in (general, linear):
        sc = parse_scenario({"version": 1, "targets": {"values": [1, 1, 2, 1, 1]}, "law": law})
        assert parse_scenario(json.loads(sc.dumps())) == sc
    assert sc.law.build().k2 == 2.0 and sc.law.build().k12 == 0.1


@pytest.mark.parametrize("bad", [
    {"version": 1, "targets": {"values": [1, 1, 2, 1, 1]}, "colour": "red"},
    {"version": 1, "targets": {"values": [1, 1, 2, 1, 1], "units": "m"}},
    {"version": 1, "targets": {"values": [1, 1, 2, 1]}},
    {"version": 2, "targets": {"values": [1, 1, 2, 1, 1]}},
    {"targets": {"values": [1, 1, 2, 1, 1]}},
    {"version": 1, "targets": {"values": [1, 1, 2, 1, 1], "convention": "cubed"}},
    {"version": 1, "targets": {"values": [1, 1, 2, 1, 1]}, "law": {"variant": "neural"}},
    {"version": 1, "targets": {"values": [1, 1, 2, 1, 1]}, "search": {"n_starts": 0}},
    {"version": 1, "targets": {"values": [1, 1, 2, 1, 1]}, "probe": {"epsilon": -1}},
    {"version": 1, "targets": {"values": [1, 1, 2, 1, 1]}, "options": {"branch_sign": 2}},
    {"version": 1, "targets": {"values": [1, 1, 2, 1, 1]}, "integrator": {"rtol": "small"}},
])
def test_schema_violations(bad, tmp_path):
    with pytest.raises(ScenarioError):
        parse_scenario(bad)
    out = tmp_path / "out"
    assert run_cli(write(tmp_path, bad), out, "attach") == EXIT_SCENARIO
    assert not out.exists()


def test_missing_and_malformed_files(tmp_path):
    assert run_cli(tmp_path / "nope.json", tmp_path, "attach") == EXIT_SCENARIO
    (tmp_path / "broken.json").write_text("{")
    assert run_cli(tmp_path / "broken.json", tmp_path, "attach") == EXIT_SCENARIO


def test_attach_report(tmp_path):
    assert run_cli(SCENARIOS / "aligned_s0.json", tmp_path, "attach") == EXIT_OK
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["schema"] == "twocycles.report/1"
    assert rep["targets_convention"] == "squared"
    assert len(rep["result"]["charts"]) == 4
    assert rep["result"]["aligned_member"]["x21"] == pytest.approx(0.6)


def test_lengths_convention_is_recorded(tmp_path):
    assert run_cli(SCENARIOS / "hull_mixed.json", tmp_path, "attach") == EXIT_OK
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["targets_convention"] == "lengths"
    np.testing.assert_allclose(rep["targets_squared"], np.array([2.0, 2.6, 2.0, 3.3, 1.4]) ** 2)
    assert rep["result"]["in_Lc"] is True


def test_simulate_from_design_is_constant(tmp_path):
    data = {"version": 1, "targets": {"values": [1, 1, 2, 1, 1]}, "options": {"T": 2.0}}
    assert run_cli(write(tmp_path, data), tmp_path, "simulate") == EXIT_OK
    header, rows = read_csv(tmp_path / "trajectory.csv")
    pos = np.array([[float(v) for v in r[1:9]] for r in rows])
    assert np.abs(pos - pos[0]).max() <= 1e-12


def test_simulate_csv_matches_report(tmp_path):
    assert run_cli(SCENARIOS / "unit_square.json", tmp_path, "simulate") == EXIT_OK
    header, rows = read_csv(tmp_path / "trajectory.csv")
    assert header == ["t", "x1", "y1", "x2", "y2", "x3", "y3", "x4", "y4", "e1", "e2", "e3", "e4", "e5"]
    rep = json.loads((tmp_path / "report.json").read_text())
    final = [float(v) for v in rows[-1][9:]]
    assert final == rep["result"]["final_errors"]
    assert float(rows[-1][0]) == pytest.approx(5.0)


def test_fixed_step_output_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli(SCENARIOS / "unit_square.json", a, "simulate", "--fixed-step") == EXIT_OK
    assert run_cli(SCENARIOS / "unit_square.json", b, "simulate", "--fixed-step") == EXIT_OK
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
    ra = json.loads((a / "report.json").read_text())
    rb = json.loads((b / "report.json").read_text())
    ra.pop("wall_time"), rb.pop("wall_time")
    assert ra == rb


def test_factorize_report(tmp_path):
    assert run_cli(SCENARIOS / "orbit_signs.json", tmp_path, "factorize") == EXIT_OK
    rep = json.loads((tmp_path / "report.json").read_text())["result"]
    assert rep["law_compatible"]
    for entry in rep["charts"]:
        assert entry["residual"] <= 1e-8
        assert entry["orbit_feasible"] is False
        assert entry["orbit"]["product"] == -1
    header, rows = read_csv(tmp_path / "sign_table.csv")
    assert header == ["chart", "orbit_element", "p", "sign"]
    assert len(rows) == 16


def test_spectrum_and_sotomayor(tmp_path):
    assert run_cli(SCENARIOS / "aligned_s0.json", tmp_path, "spectrum") == EXIT_OK
    rec = json.loads((tmp_path / "report.json").read_text())["result"]["records"][0]
    assert rec["class"] == "design" and rec["gauge_zeros"] == 3
    assert run_cli(SCENARIOS / "aligned_s0.json", tmp_path, "sotomayor") == EXIT_OK
    rep = json.loads((tmp_path / "report.json").read_text())["result"]["report"]
    assert rep["verdict"] == "transcritical"


def test_classify_hull(tmp_path):
    assert run_cli(SCENARIOS / "hull_mixed.json", tmp_path, "classify") == EXIT_OK
    rep = json.loads((tmp_path / "report.json").read_text())["result"]
    assert rep["typeA_empirical"] is False
    assert rep["design_found"] == 4
    lead = [max(v[0] for v in r["eigenvalues"]) for r in rep["stable_ancillary"]]
    assert any(abs(x + 1.77) < 0.01 for x in lead)
    header, rows = read_csv(tmp_path / "equilibria.csv")
    assert len(rows) == len(rep["design"]) + len(rep["ancillary"])


def test_equilibria_seed_override_is_deterministic(tmp_path):
    data = {"version": 1, "targets": {"values": [1, 1, 2, 1, 1]}, "search": {"n_starts": 20}}
    path = write(tmp_path, data)
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli(path, a, "equilibria", "--seed-override", "5") == EXIT_OK
    assert run_cli(path, b, "equilibria", "--seed-override", "5") == EXIT_OK
    ra = json.loads((a / "report.json").read_text())
    rb = json.loads((b / "report.json").read_text())
    assert ra["scenario"]["search"]["seed"] == 5
    assert ra["result"] == rb["result"]


def test_continue_bifurcation_csv(tmp_path):
    data = json.loads((SCENARIOS / "aligned_s0.json").read_text())
    data["options"]["mu_range"] = [-0.05, 0.05]
    assert run_cli(write(tmp_path, data), tmp_path, "continue") == EXIT_OK
    header, rows = read_csv(tmp_path / "bifurcation.csv")
    keys = [(r[0], r[1]) for r in rows]
    assert len(keys) == len(set(keys))
    design = {float(r[1]): float(r[2]) for r in rows if r[0] == "design"}
    assert design[-0.01] < 0 < design[0.01]
    rep = json.loads((tmp_path / "report.json").read_text())["result"]
    assert abs(rep["mu_star"]) <= 1e-3


def test_numeric_failure_exit_code(tmp_path):
    data = {"version": 1, "targets": {"values": [1, 1, 2, 1, 1]},
            "law": {"variant": "shared_scalar_poly", "coefficients": [-1.0]},
            "options": {"initial": [[0, 0], [1.1, 0.1], [0.9, 1.2], [-0.1, 0.95]], "T": 100.0}}
    assert run_cli(write(tmp_path, data), tmp_path, "simulate") == EXIT_NUMERIC
    diag = json.loads((tmp_path / "failure.json").read_text())
    assert diag["error"] == "IntegrationError" and diag["t"] > 0
    infeasible = {"version": 1, "targets": {"values": [100, 1, 1, 1, 1]}}
    assert run_cli(write(tmp_path, infeasible), tmp_path, "spectrum") == EXIT_NUMERIC


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "twocycles.cli_io", "--scenario",
                           str(SCENARIOS / "aligned_s0.json"), "--out", str(tmp_path),
                           "--command", "attach"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "report.json").exists()
