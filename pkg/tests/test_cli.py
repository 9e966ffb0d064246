from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest

from dysonlab.analysis import Grid, GridField
from dysonlab.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, SCENARIOS, RunConfig, main, validate
from dysonlab.coupled_burgers import from_riemann_invariants
from dysonlab.oracles import rho_selfsim, u_selfsim


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def run_json(out):
    return json.loads((out / "run.json").read_text())


def test_validate_examples():
    errs = validate({"scenario": "coupled_riemann", "parameters": {}})
    assert len(errs) == 1 and "alpha" in errs[0]
    errs = validate({"scenario": "coupled_riemann", "parameters": {"alpha": 1.0, "n_cells": -4}})
    assert len(errs) == 1 and "n_cells" in errs[0] and "range" in errs[0]
    assert validate({"scenario": "coupled_riemann", "parameters": {"alpha": 1.0}}) == []
    assert validate(RunConfig("oracle_tables")) == []


def test_validate_rejects_typos_and_bad_types():
    errs = validate({"scenario": "oracle_tables", "parameters": {"gamam": 1.0, "n_points": "many"},
                     "sed": 3})
    assert any("gamam" in e for e in errs)
    assert any("n_points" in e for e in errs)
    assert any("sed" in e for e in errs)
    assert validate({"scenario": "nope"})[0].startswith("unknown scenario")
    assert validate({"scenario": "oracle_tables", "seed": -1})
    assert validate({"scenario": "oracle_tables", "parameters": {"x_min": float("nan")}})


def test_every_scenario_has_defaults_or_required_keys():
    assert len(SCENARIOS) == 11
    for name, sc in SCENARIOS.items():
        assert sc.columns and sc.params, name


def test_oracle_tables_match_closed_form(tmp_path):
    out = tmp_path / "o"
    assert main(["oracle_tables", "--out", str(out)]) == EXIT_OK
    for t in (0.5, 1.0, 2.0):
        header, data = read_csv(out / f"oracle_t{t:g}.csv")
        assert header == ["x", "rho", "u"]
        np.testing.assert_allclose(data[:, 1], rho_selfsim(data[:, 0], t), atol=1e-15)
        np.testing.assert_allclose(data[:, 2], u_selfsim(data[:, 0], t), atol=1e-15)
    rec = run_json(out)
    assert rec["status"] == "ok" and rec["series"]["t"] == [0.5, 1.0, 2.0]
    assert all(abs(m - 1) <= 1e-3 for m in rec["series"]["mass"])


def _riemann(tmp_path, name, rho_l=2.0):
    out = tmp_path / name
    code = main(["coupled_riemann", "--set", "alpha=1", "--set", "n_cells=512",
                 "--set", f"rho_l={rho_l}", "--out", str(out)])
    assert code == EXIT_OK
    header, data = read_csv(out / "trajectory.csv")
    assert header == ["t", "x", "rho", "u", "f_plus", "f_minus"]
    return out, data


def test_coupled_riemann_through_cli(tmp_path):
    out, data = _riemann(tmp_path, "a")
    g = Grid(-3.0, 3.0, 512)
    for t in np.unique(data[:, 0]):
        rows = data[data[:, 0] == t]
        s = from_riemann_invariants(GridField(g, rows[:, 4]), GridField(g, rows[:, 5]), 1.0)
        np.testing.assert_allclose(s.rho.values, rows[:, 2], atol=1e-14)
        np.testing.assert_allclose(s.u.values, rows[:, 3], atol=1e-14)
    rec = run_json(out)
    assert rec["summary"]["entropy_residual_max_positive"] <= 1e-10
    assert rec["summary"]["entropy_production_total"] < 0
    assert rec["series"]["mass"][0] == pytest.approx(rec["series"]["mass"][-1], rel=1e-2)


def test_coupled_riemann_stability_through_cli(tmp_path):
    _, a = _riemann(tmp_path, "a")
    _, b = _riemann(tmp_path, "b", rho_l=2.1)
    dx = 6.0 / 512
    times = np.unique(a[:, 0])
    x = a[a[:, 0] == times[0]][:, 1]
    dist = [np.sum(np.abs(np.where(x < 0, 2.0, 1.0) - np.where(x < 0, 2.1, 1.0))) * dx]
    for t in times:
        sa, sb = a[a[:, 0] == t], b[b[:, 0] == t]
        dist.append((np.sum(np.abs(sa[:, 2] - sb[:, 2])) + np.sum(np.abs(sa[:, 3] - sb[:, 3]))) * dx)
    assert all(d <= 2 * dist[0] for d in dist[1:])


def test_hamiltonian_verify_report(tmp_path):
    out = tmp_path / "h"
    assert main(["hamiltonian_verify", "--set", "trials=5", "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "hamiltonian_report.json").read_text())
    assert len(rep) == 12 and all(r["max_defect"] <= 1e-10 for r in rep)
    assert run_json(out)["summary"]["all_below_threshold"] is True


def test_config_error_exit_code_and_record(tmp_path, capsys):
    out = tmp_path / "bad"
    assert main(["coupled_riemann", "--out", str(out)]) == EXIT_CONFIG
    rec = run_json(out)
    assert rec["status"] == "invalid_config" and "alpha" in rec["error"]["errors"][0]
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["kind"] == "config"
    assert main(["oracle_tables", "--set", "oops"]) == EXIT_CONFIG


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scenario": "continuum_limit", "parameters": {"N_list": [16, 32, 64]},
                               "output_dir": str(tmp_path / "c"), "seed": 4}))
    assert main(["continuum_limit", "--config", str(cfg), "--set", "amp=0.05"]) == EXIT_OK
    rec = run_json(tmp_path / "c")
    assert rec["resolved_parameters"]["amp"] == 0.05 and rec["config"]["seed"] == 4
    assert "config_file" in rec["input_hashes"]
    assert main(["oracle_tables", "--config", str(cfg)]) == EXIT_CONFIG
    cfg.write_text("[1, 2]")
    assert main(["continuum_limit", "--config", str(cfg)]) == EXIT_CONFIG


def test_numeric_failure_writes_record(tmp_path, capsys):
    out = tmp_path / "n"
    code = main(["cm_chain", "--set", "N=64", "--set", "velocity_factor=-5", "--set", "n_steps=2000",
                 "--out", str(out)])
    assert code == EXIT_NUMERIC
    rec = run_json(out)
    assert rec["status"] == "numeric_failure"
    assert rec["error"]["type"] == "OrderingError" and rec["error"]["t"] > 0
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["kind"] == "numeric"


def _dyson(tmp_path, name, *extra):
    out = tmp_path / name
    args = ["dyson_particles", "--set", "N=40", "--set", "t_end=1", "--set", "dt_out=0.25",
            "--out", str(out), *extra]
    assert main(args) == EXIT_OK
    return out


def test_runs_are_bitwise_reproducible(tmp_path):
    a = _dyson(tmp_path, "a", "--set", "noise_scale=1", "--set", "seed=7")
    b = _dyson(tmp_path, "b", "--set", "noise_scale=1", "--set", "seed=7")
    c = _dyson(tmp_path, "c", "--set", "noise_scale=1", "--set", "seed=8")
    for name in ("diagnostics.csv", "positions.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "positions.csv").read_bytes() != (c / "positions.csv").read_bytes()


def test_lab_seed_overrides_config(tmp_path, monkeypatch):
    monkeypatch.setenv("LAB_SEED", "7")
    a = _dyson(tmp_path, "a", "--set", "seed=1")
    monkeypatch.delenv("LAB_SEED")
    b = _dyson(tmp_path, "b", "--set", "seed=7")
    assert run_json(a)["config"]["seed"] == 7
    assert (a / "positions.csv").read_bytes() == (b / "positions.csv").read_bytes()
    monkeypatch.setenv("LAB_SEED", "x")
    assert main(["oracle_tables", "--out", str(tmp_path / "z")]) == EXIT_CONFIG


def test_svg_plots_leave_csvs_unchanged(tmp_path):
    a = _dyson(tmp_path, "a")
    b = _dyson(tmp_path, "b", "--plot")
    for name in ("diagnostics.csv", "positions.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    svg = (b / "diagnostics.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg
    assert "diagnostics.svg" in run_json(b)["outputs"]
    assert not list(a.glob("*.svg"))


@pytest.mark.parametrize("scenario,args", [
    ("characteristics_trace", ["t=1", "n_points=32"]),
    ("blowup", ["n_cells=1024", "steepening=false"]),
    ("gas_compare", ["n_cells=256"]),
    ("fput_chain", ["N=16", "n_steps=200"]),
    ("cm_chain", ["n_steps=200"]),
    ("cm_chain", ["mode=bridge", "t_end=0.2", "dt=1e-3"]),
    ("continuum_limit", ["N_list=16,32"]),
    ("lagrangian_pde", ["M=64", "n_cells=256", "n_steps=20"]),
])
def test_scenarios_smoke(tmp_path, scenario, args):
    out = tmp_path / "s"
    argv = [scenario, "--out", str(out)]
    for a in args:
        argv += ["--set", a]
    assert main(argv) == EXIT_OK
    rec = run_json(out)
    assert rec["status"] == "ok" and rec["outputs"]
    for name in rec["outputs"]:
        assert (out / name).exists()
    for v in rec["summary"].values():
        if isinstance(v, float):
            assert math.isfinite(v)


def test_help_lists_scenarios_and_columns(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    text = capsys.readouterr().out
    for name in SCENARIOS:
        assert name in text
    assert "flow_map.csv: t,xi,X,V,tau" in text
