"""``lab``: scenario runner that writes a run record, CSV data and optional SVG plots."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import tempfile
import time
import traceback
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
from scipy.integrate import trapezoid

from . import __version__

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_REQUIRED = object()


# ---------------------------------------------------------------------------
# parameter schema


@dataclass(frozen=True)
class Param:
    kind: str  # int | float | str | bool | floats | ints
    default: Any = _REQUIRED
    lo: float | None = None
    hi: float | None = None
    choices: tuple | None = None
    strict_lo: bool = False


def _coerce(name: str, p: Param, value) -> tuple[Any, str | None]:
    try:
        if p.kind == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            v = int(value)
        elif p.kind == "float":
            if isinstance(value, bool):
                raise TypeError
            v = float(value)
        elif p.kind == "bool":
            if isinstance(value, str):
                if value.lower() not in ("true", "false", "1", "0"):
                    raise TypeError
                v = value.lower() in ("true", "1")
            elif isinstance(value, (bool, int)):
                v = bool(value)
            else:
                raise TypeError
        elif p.kind == "str":
            if not isinstance(value, str):
                raise TypeError
            v = value
        elif p.kind in ("floats", "ints"):
            items = value.split(",") if isinstance(value, str) else list(value)
            cast = float if p.kind == "floats" else int
            v = [cast(s) for s in items]
            if not v:
                raise TypeError
        else:
            raise AssertionError(p.kind)
    except (TypeError, ValueError):
        return None, f"{name}: expected {p.kind}, got {value!r}"
    vals = v if isinstance(v, list) else [v]
    for x in vals:
        if p.kind in ("int", "float", "floats", "ints"):
            if not math.isfinite(x):
                return None, f"{name}: value {x!r} is not finite"
            if p.lo is not None and (x < p.lo or (p.strict_lo and x <= p.lo)):
                op = ">" if p.strict_lo else ">="
                return None, f"{name}: value {x!r} out of range (must be {op} {p.lo})"
            if p.hi is not None and x > p.hi:
                return None, f"{name}: value {x!r} out of range (must be <= {p.hi})"
        if p.choices is not None and x not in p.choices:
            return None, f"{name}: {x!r} not one of {list(p.choices)}"
    return v, None


# ---------------------------------------------------------------------------
# configuration and run record


@dataclass
class RunConfig:
    scenario: str
    parameters: dict = field(default_factory=dict)
    output_dir: str = "lab_out"
    seed: int = 0


@dataclass
class RunRecord:
    config: dict
    resolved_parameters: dict
    started: str
    finished: str | None = None
    status: str = "running"
    version: str = __version__
    input_hashes: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    error: dict | None = None


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# ---------------------------------------------------------------------------
# small output helpers


class Outputs:
    def __init__(self, out_dir: Path):
        self.dir = out_dir
        self.files: list[str] = []
        self.plots: list[tuple[str, str, list[str], str | None]] = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.dir / name

    def table(self, name: str, header: list[str], rows) -> None:
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])

    def plot(self, csv_name: str, x: str, ys: list[str], group: str | None = None) -> None:
        self.plots.append((csv_name, x, ys, group))


def _read_csv(path: Path) -> dict[str, list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {h: [r[i] for r in body] for i, h in enumerate(header)}


def svg_polyline_plot(path: Path, curves: list[tuple[str, np.ndarray, np.ndarray]],
                      title: str, width: int = 640, height: int = 400) -> None:
    """Write an SVG with one polyline per curve, scaled to a shared box."""
    pad = 40
    xs = [c[1][np.isfinite(c[1]) & np.isfinite(c[2])] for c in curves]
    ys = [c[2][np.isfinite(c[1]) & np.isfinite(c[2])] for c in curves]
    xs_all = np.concatenate(xs) if xs else np.zeros(1)
    ys_all = np.concatenate(ys) if ys else np.zeros(1)
    if xs_all.size == 0:
        xs_all = ys_all = np.zeros(1)
    x0, x1 = float(xs_all.min()), float(xs_all.max())
    y0, y1 = float(ys_all.min()), float(ys_all.max())
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0
    colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
             'fill="none" stroke="#888"/>',
             f'<text x="{pad}" y="{pad - 12}" font-size="13">{title}</text>',
             f'<text x="{pad}" y="{height - 12}" font-size="11">x: [{x0:.4g}, {x1:.4g}]  '
             f'y: [{y0:.4g}, {y1:.4g}]</text>']
    for k, ((label, _, _), x, y) in enumerate(zip(curves, xs, ys)):
        px = pad + (x - x0) / (x1 - x0) * (width - 2 * pad)
        py = height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        col = colours[k % len(colours)]
        parts.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.2" points="{pts}"/>')
        parts.append(f'<text x="{width - pad - 120}" y="{pad + 14 * (k + 1)}" font-size="11" '
                     f'fill="{col}">{label}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")


def _emit_plots(out: Outputs) -> list[str]:
    made = []
    for csv_name, x, ys, group in out.plots:
        data = _read_csv(out.dir / csv_name)
        curves = []
        if group is None:
            xv = np.array(data[x], dtype=float)
            for y in ys:
                curves.append((y, xv, np.array(data[y], dtype=float)))
        else:
            g = np.array(data[group], dtype=float)
            keys = list(dict.fromkeys(g.tolist()))
            if len(keys) > 8:
                keys = [keys[i] for i in np.linspace(0, len(keys) - 1, 8).round().astype(int)]
            for key in keys:
                sel = g == key
                for y in ys:
                    curves.append((f"{y} {group}={key:.3g}", np.array(data[x], dtype=float)[sel],
                                   np.array(data[y], dtype=float)[sel]))
        name = Path(csv_name).stem + ".svg"
        svg_polyline_plot(out.dir / name, curves, f"{csv_name}: {', '.join(ys)} vs {x}")
        made.append(name)
    return made


# ---------------------------------------------------------------------------
# scenarios


def _semicircle_positions(N: int, radius: float) -> np.ndarray:
    from .oracles import SemicircleLaw

    return SemicircleLaw(radius).quantile((np.arange(N) + 0.5) / N)


def _sc_oracle_tables(p: dict, out: Outputs, ctx: dict) -> dict:
    from .oracles import oracle_table

    x = np.linspace(p["x_min"], p["x_max"], p["n_points"])
    series = {"t": [], "mass": []}
    for t in p["times"]:
        tab = oracle_table(t, x, p["gamma"], p["sigma0"])
        name = f"oracle_t{t:g}.csv"
        out.table(name, ["x", "rho", "u"], zip(tab["x"], tab["rho"], tab["u"]))
        out.plot(name, "x", ["rho", "u"])
        series["t"].append(t)
        series["mass"].append(float(trapezoid(tab["rho"], x)))
    return {"series": series, "summary": {}}


def _initial_data(p: dict):
    from .characteristics import InitialData

    kind = p["data"]
    if kind == "cauchy":
        return InitialData.cauchy(p["eps"])
    if kind == "semicircle":
        return InitialData.semicircle(p["radius"])
    return InitialData.quadratic_gaussian()


def _sc_characteristics_trace(p: dict, out: Outputs, ctx: dict) -> dict:
    from .characteristics import CharacteristicSolve, trace

    data = _initial_data(p)
    cfg = CharacteristicSolve(gamma=p["gamma"], t=p["t"], newton_tol=p["newton_tol"])
    xs = np.linspace(p["x_min"], p["x_max"], p["n_points"])
    threads = ctx["threads"]
    res = trace(xs, cfg, data, mode="parallel" if threads > 1 else "sequential", threads=threads)
    out.table("trace.csv", ["x", "rho", "u", "w_re", "w_im"],
              zip(res["x"], res["rho"], res["u"], res["w"].real, res["w"].imag))
    out.plot("trace.csv", "x", ["rho", "u"])
    dx = xs[1] - xs[0]
    return {"series": {}, "summary": {"mass_on_window": float(np.sum(res["rho"]) * dx),
                                      "rho_max": float(np.max(res["rho"]))}}


def _sc_blowup(p: dict, out: Outputs, ctx: dict) -> dict:
    from .analysis import FieldKind, Grid, GridField, hilbert_transform, pv_derivative_of_hilbert
    from .characteristics import InitialData, blowup_estimate, steepening_time

    data = InitialData.quadratic_gaussian()
    grid = Grid(p["x_min"], p["x_max"], p["n_cells"])
    rho0 = data.density(grid.centers)
    field0 = GridField(grid, rho0, FieldKind.DENSITY)
    rep = blowup_estimate(field0, p["gamma"], velocity_scale=p["velocity_scale"], x0=0.0)
    h = hilbert_transform(field0).values
    dh = pv_derivative_of_hilbert(field0).values
    out.table("blowup_profile.csv", ["x", "rho0", "H_rho0", "dx_H_rho0"],
              zip(grid.centers, rho0, h, dh))
    out.plot("blowup_profile.csv", "x", ["rho0", "dx_H_rho0"])
    summary = rep.as_dict()
    if p["steepening"]:
        reg = data.blend(InitialData.cauchy(1.0), p["delta"])
        summary["t_steepening"] = steepening_time(reg, threshold=p["threshold"], t_max=p["t_max"],
                                                  gamma=p["gamma"])
        summary["relative_gap"] = abs(summary["t_steepening"] - rep.t_star) / rep.t_star
    return {"series": {}, "summary": summary}


def _sc_dyson_particles(p: dict, out: Outputs, ctx: dict) -> dict:
    from .dyson_particles import ParticleState, simulate
    from .oracles import second_moment_law

    rng = np.random.default_rng(ctx["seed"])
    N = p["N"]
    if p["init"] == "uniform":
        lam = np.sort(rng.uniform(-p["half_width"], p["half_width"], N))
    else:
        lam = _semicircle_positions(N, p["half_width"])
    state = ParticleState(lam, p["gamma"], 0.0)
    states, rec = simulate(state, p["t_end"], p["dt_out"], seed=rng, noise_scale=p["noise_scale"],
                           tol=p["tol"], entropy=p["entropy"])
    arr = rec.as_arrays()
    m2_law = second_moment_law(arr["t"], p["gamma"], float(np.mean(lam ** 2)))
    cols = ["t", "mass", "m2", "m2_law", "E_free", "theta", "Phi", "w1"]
    out.table("diagnostics.csv", cols,
              zip(*[arr[c] if c != "m2_law" else m2_law for c in cols]))
    out.plot("diagnostics.csv", "t", ["m2", "m2_law"])
    out.plot("diagnostics.csv", "t", ["w1"])
    out.table("positions.csv", ["t", "index", "x"],
              ((s.t, j, float(x)) for s in states for j, x in enumerate(s.positions)))
    series = {k: v for k, v in arr.items()}
    series["m2_law"] = m2_law
    phi = arr["Phi"]
    return {"series": series,
            "summary": {"w1_final": float(arr["w1"][-1]),
                        "Phi_monotone": bool(np.all(np.diff(phi) <= 0.0)),
                        "m2_max_rel_err": float(np.max(np.abs(arr["m2"] - m2_law) / m2_law))}}


def _riemann_state(p: dict):
    from .analysis import Grid
    from .coupled_burgers import StateRhoU

    grid = Grid(p["x_min"], p["x_max"], p["n_cells"])
    x = grid.centers
    rho = np.where(x < p["x_split"], p["rho_l"], p["rho_r"])
    u = np.where(x < p["x_split"], p["u_l"], p["u_r"])
    return StateRhoU.from_arrays(grid, rho, u, p["alpha"])


def _sc_coupled_riemann(p: dict, out: Outputs, ctx: dict) -> dict:
    from .coupled_burgers import (EntropyPairSpec, Psi, entropy_residual, hamiltonians,
                                  solve_coupled)

    init = _riemann_state(p)
    outs = np.linspace(0.0, p["T"], p["n_out"] + 1)[1:]
    traj = solve_coupled(init, p["T"], cfl=p["cfl"], out_times=outs)
    traj.to_csv(out.path("trajectory.csv"))
    out.plot("trajectory.csv", "x", ["rho", "u"], group="t")
    series = {"t": traj.times.tolist(), "mass": [], "H1": [], "H2": [], "energy": []}
    for i in range(len(traj)):
        h = hamiltonians(traj.state(i))
        for k in ("mass", "H1", "H2", "energy"):
            series[k].append(h[k])
    full = solve_coupled(init, p["T"], cfl=p["cfl"], every_step=True)
    sq = Psi("square")
    res = entropy_residual(full, EntropyPairSpec(sq, sq, 1.0, 1.0))
    return {"series": series,
            "summary": {"entropy_residual_max_positive": res.max_positive,
                        "entropy_production_total": float(np.sum(res.total_rate * np.diff(full.times)))}}


def _sc_gas_compare(p: dict, out: Outputs, ctx: dict) -> dict:
    from .coupled_burgers import shock_position, solve_coupled, solve_gas

    init = _riemann_state(p)
    tc = solve_coupled(init, p["T"], cfl=p["cfl"])
    tg = solve_gas(init, p["T"], cfl=p["cfl"])
    x = init.grid.centers
    out.table("compare.csv", ["x", "rho_coupled", "u_coupled", "rho_gas", "u_gas"],
              zip(x, tc.rho[-1], tc.u[-1], tg.rho[-1], tg.u[-1]))
    out.plot("compare.csv", "x", ["rho_coupled", "rho_gas"])
    window = (p["x_split"], p["x_max"])
    sc = shock_position(x, tc.rho[-1], x_range=window)
    sg = shock_position(x, tg.rho[-1], x_range=window)
    dx = init.grid.dx
    return {"series": {}, "summary": {"shock_coupled": sc, "shock_gas": sg,
                                      "cells_apart": abs(sc - sg) / dx}}


def _sc_hamiltonian_verify(p: dict, out: Outputs, ctx: dict) -> dict:
    from .hamiltonian import report_json, verification_report

    rep = verification_report(p["n"], p["trials"], p["alpha"], ctx["seed"], p["method"])
    (out.path("hamiltonian_report.json")).write_text(report_json(rep) + "\n")
    out.table("hamiltonian_report.csv", ["operator", "identity", "max_defect"],
              ((r["operator"], r["identity"], r["max_defect"]) for r in rep))
    worst = max(r["max_defect"] for r in rep)
    return {"series": {}, "summary": {"max_defect": worst, "threshold": p["threshold"],
                                      "all_below_threshold": bool(worst <= p["threshold"])}}


def _chain_run(state, p: dict, out: Outputs) -> dict:
    from .lagrangian import run_chain

    final, ser = run_chain(state, p["dt"], p["n_steps"], record_every=p["record_every"])
    out.table("chain_series.csv", ["t", "H", "P"], zip(ser["t"], ser["H"], ser["P"]))
    out.plot("chain_series.csv", "t", ["H"])
    out.table("chain_final.csv", ["index", "x", "v"],
              ((j, float(a), float(b)) for j, (a, b) in enumerate(zip(final.positions, final.velocities))))
    H, P = ser["H"], ser["P"]
    K0 = 0.5 * float(np.sum(state.velocities ** 2)) / state.N
    scale = max(abs(H[0]), K0)
    return {"series": {"t": ser["t"], "H": H, "P": P},
            "summary": {"H_drift_relative": float(np.max(np.abs(H - H[0])) / scale),
                        "H_scale": scale,
                        "P_drift": float(np.max(np.abs(P - P[0])))}}


def _sc_fput_chain(p: dict, out: Outputs, ctx: dict) -> dict:
    from .lagrangian import ChainState, SmoothProfile

    xi = (np.arange(p["N"]) + 0.5) / p["N"]
    x = SmoothProfile(p["amp"]).X(xi)
    return _chain_run(ChainState(x, np.zeros_like(x), p["alpha"], "fput"), p, out)


def _sc_cm_chain(p: dict, out: Outputs, ctx: dict) -> dict:
    from .dyson_particles import drift_array
    from .lagrangian import ChainState, dyson_vs_cm_bridge

    if p["mode"] == "bridge":
        rep = dyson_vs_cm_bridge(p["N"], p["t_end"], dt_cm=p["dt"])
        out.table("bridge.csv", ["index", "x_dyson", "x_cm"],
                  ((j, a, b) for j, (a, b) in enumerate(zip(rep["x"], rep["x_cm"]))))
        summary = {k: v for k, v in rep.items() if k not in ("x", "x_cm")}
        return {"series": {}, "summary": summary}
    x = _semicircle_positions(p["N"], p["radius"])
    v = p["velocity_factor"] * drift_array(x, 0.0)
    return _chain_run(ChainState(x, v, p["alpha"], "calogero_moser"), p, out)


def _sc_continuum_limit(p: dict, out: Outputs, ctx: dict) -> dict:
    from .lagrangian import SmoothProfile, continuum_limit_residual

    prof = SmoothProfile(p["amp"], p["slope"])
    res = continuum_limit_residual(prof, p["N_list"], alpha=p["alpha"], model=p["model"])
    out.table("residual.csv", ["N", "residual"], zip(res["N"], res["residual"]))
    out.plot("residual.csv", "N", ["residual"])
    return {"series": {"N": res["N"], "residual": res["residual"]},
            "summary": {"fitted_order": res["fitted_order"], "model": res["model"]}}


def _sc_lagrangian_pde(p: dict, out: Outputs, ctx: dict) -> dict:
    from .analysis import FieldKind, Grid, GridField
    from .lagrangian import flow_map_from_density, step_lagrangian_pde

    grid = Grid(0.0, 1.0, p["n_cells"])
    rho0 = 1.0 + p["amp"] * np.sin(2 * math.pi * grid.centers)
    st = flow_map_from_density(GridField(grid, rho0, FieldKind.DENSITY), p["M"], alpha=p["alpha"],
                               periodic=True)
    path = out.path("flow_map.csv")
    st.to_csv(path)
    dt = p["T"] / p["n_steps"]
    times, tau_min = [st.t], [float(st.tau.min())]
    for k in range(1, p["n_steps"] + 1):
        st = step_lagrangian_pde(st, dt)
        times.append(st.t)
        tau_min.append(float(st.tau.min()))
    st.to_csv(path, mode="a")
    out.plot("flow_map.csv", "xi", ["X"], group="t")
    return {"series": {"t": times, "tau_min": tau_min}, "summary": {"t_final": st.t}}


_RIEMANN = {
    "rho_l": Param("float", 2.0, 0.0, strict_lo=True),
    "rho_r": Param("float", 1.0, 0.0, strict_lo=True),
    "u_l": Param("float", 0.0),
    "u_r": Param("float", 0.0),
    "x_split": Param("float", 0.0),
    "x_min": Param("float", -3.0),
    "x_max": Param("float", 3.0),
    "n_cells": Param("int", 2048, 2),
    "T": Param("float", 1.0, 0.0, strict_lo=True),
    "cfl": Param("float", 0.45, 0.0, 1.0, strict_lo=True),
}

_CHAIN = {
    "dt": Param("float", 1e-3, 0.0, strict_lo=True),
    "n_steps": Param("int", 10000, 1),
    "record_every": Param("int", 100, 1),
}


@dataclass(frozen=True)
class Scenario:
    run: Callable[[dict, Outputs, dict], dict]
    params: dict
    columns: str


SCENARIOS: dict[str, Scenario] = {
    "oracle_tables": Scenario(_sc_oracle_tables, {
        "times": Param("floats", [0.5, 1.0, 2.0], 0.0, strict_lo=True),
        "gamma": Param("float", 0.0, 0.0),
        "sigma0": Param("float", 1.0, 0.0, strict_lo=True),
        "x_min": Param("float", -4.0),
        "x_max": Param("float", 4.0),
        "n_points": Param("int", 401, 2),
    }, "oracle_t<t>.csv: x,rho,u"),
    "characteristics_trace": Scenario(_sc_characteristics_trace, {
        "data": Param("str", "cauchy", choices=("cauchy", "semicircle", "quadratic_gaussian")),
        "eps": Param("float", 1.0, 0.0, strict_lo=True),
        "radius": Param("float", 2.0, 0.0, strict_lo=True),
        "gamma": Param("float", 0.0, 0.0),
        "t": Param("float", _REQUIRED, 0.0),
        "x_min": Param("float", -4.0),
        "x_max": Param("float", 4.0),
        "n_points": Param("int", 256, 2),
        "newton_tol": Param("float", 1e-12, 0.0, strict_lo=True),
    }, "trace.csv: x,rho,u,w_re,w_im"),
    "blowup": Scenario(_sc_blowup, {
        "gamma": Param("float", 0.0, 0.0),
        "x_min": Param("float", -8.0),
        "x_max": Param("float", 8.0),
        "n_cells": Param("int", 4096, 8),
        "velocity_scale": Param("float", math.pi, 0.0, strict_lo=True),
        "steepening": Param("bool", True),
        "delta": Param("float", 1e-9, 0.0, 1.0, strict_lo=True),
        "threshold": Param("float", -1e3, hi=0.0),
        "t_max": Param("float", 1.0, 0.0, strict_lo=True),
    }, "blowup_profile.csv: x,rho0,H_rho0,dx_H_rho0"),
    "dyson_particles": Scenario(_sc_dyson_particles, {
        "N": Param("int", 400, 2),
        "gamma": Param("float", 1.0, 0.0),
        "init": Param("str", "uniform", choices=("uniform", "semicircle")),
        "half_width": Param("float", 3.0, 0.0, strict_lo=True),
        "t_end": Param("float", 10.0, 0.0, strict_lo=True),
        "dt_out": Param("float", 0.5, 0.0, strict_lo=True),
        "noise_scale": Param("float", 0.0, 0.0),
        "tol": Param("float", 1e-5, 0.0, strict_lo=True),
        "entropy": Param("bool", False),
    }, "diagnostics.csv: t,mass,m2,m2_law,E_free,theta,Phi,w1; positions.csv: t,index,x"),
    "coupled_riemann": Scenario(_sc_coupled_riemann, {
        "alpha": Param("float", _REQUIRED, 0.0, strict_lo=True),
        **_RIEMANN,
        "n_out": Param("int", 4, 1),
    }, "trajectory.csv: t,x,rho,u,f_plus,f_minus"),
    "gas_compare": Scenario(_sc_gas_compare, {
        "alpha": Param("float", 1.0, 0.0, strict_lo=True),
        **_RIEMANN,
    }, "compare.csv: x,rho_coupled,u_coupled,rho_gas,u_gas"),
    "hamiltonian_verify": Scenario(_sc_hamiltonian_verify, {
        "n": Param("int", 256, 16),
        "trials": Param("int", 50, 1),
        "alpha": Param("float", 1.0),
        "method": Param("str", "spectral", choices=("spectral", "fd4")),
        "threshold": Param("float", 1e-10, 0.0, strict_lo=True),
    }, "hamiltonian_report.csv: operator,identity,max_defect (plus hamiltonian_report.json)"),
    "fput_chain": Scenario(_sc_fput_chain, {
        "N": Param("int", 64, 2),
        "alpha": Param("float", 1.0),
        "amp": Param("float", 0.1),
        **_CHAIN,
    }, "chain_series.csv: t,H,P; chain_final.csv: index,x,v"),
    "cm_chain": Scenario(_sc_cm_chain, {
        "N": Param("int", 16, 2),
        "alpha": Param("float", -math.pi ** 2),
        "radius": Param("float", 2.0, 0.0, strict_lo=True),
        "velocity_factor": Param("float", 1.0),
        "mode": Param("str", "run", choices=("run", "bridge")),
        "t_end": Param("float", 1.0, 0.0, strict_lo=True),
        **_CHAIN,
    }, "chain_series.csv: t,H,P; chain_final.csv: index,x,v; bridge mode: bridge.csv: index,x_dyson,x_cm"),
    "continuum_limit": Scenario(_sc_continuum_limit, {
        "N_list": Param("ints", [100, 200, 400, 800], 8),
        "alpha": Param("float", 1.0),
        "model": Param("str", "fput", choices=("fput", "calogero_moser")),
        "amp": Param("float", 0.1),
        "slope": Param("float", 1.0, 0.0, strict_lo=True),
    }, "residual.csv: N,residual"),
    "lagrangian_pde": Scenario(_sc_lagrangian_pde, {
        "M": Param("int", 1024, 2),
        "alpha": Param("float", 1.0, 0.0, strict_lo=True),
        "amp": Param("float", 0.2, 0.0, 0.99),
        "n_cells": Param("int", 2048, 2),
        "T": Param("float", 0.1, 0.0, strict_lo=True),
        "n_steps": Param("int", 200, 1),
    }, "flow_map.csv: t,xi,X,V,tau (rows for t = 0 and t = T)"),
}

_TOP_KEYS = {"scenario", "parameters", "output_dir", "seed"}


def validate(config: RunConfig | dict) -> list[str]:
    """All configuration errors; an empty list means the config is runnable."""
    if isinstance(config, dict):
        errs = [f"unknown top-level key {k!r}" for k in config if k not in _TOP_KEYS]
        try:
            config = RunConfig(**{k: v for k, v in config.items() if k in _TOP_KEYS})
        except TypeError as exc:
            return errs + [str(exc)]
    else:
        errs = []
    if config.scenario not in SCENARIOS:
        return errs + [f"unknown scenario {config.scenario!r}; choose from {sorted(SCENARIOS)}"]
    if isinstance(config.seed, bool) or not isinstance(config.seed, int) or not 0 <= config.seed < 2 ** 64:
        errs.append(f"seed: expected a 64-bit unsigned integer, got {config.seed!r}")
    if not isinstance(config.parameters, dict):
        return errs + ["parameters must be a key/value map"]
    schema = SCENARIOS[config.scenario].params
    for k in config.parameters:
        if k not in schema:
            errs.append(f"unknown parameter {k!r} for scenario {config.scenario}")
    for k, p in schema.items():
        if k in config.parameters:
            _, e = _coerce(k, p, config.parameters[k])
            if e:
                errs.append(e)
        elif p.default is _REQUIRED:
            errs.append(f"missing required parameter {k!r}")
    return errs


def resolve(config: RunConfig) -> dict:
    schema = SCENARIOS[config.scenario].params
    out = {}
    for k, p in schema.items():
        out[k] = _coerce(k, p, config.parameters[k])[0] if k in config.parameters else p.default
    return out


def _numeric_errors() -> tuple:
    from .characteristics import CharacteristicsError
    from .coupled_burgers import CFLError, VacuumError
    from .dyson_particles import CollisionError
    from .lagrangian import OrderingError

    return (CharacteristicsError, CFLError, VacuumError, CollisionError, OrderingError,
            FloatingPointError, ArithmeticError, np.linalg.LinAlgError, RuntimeError, ValueError)


def _error_payload(exc: BaseException, kind: str) -> dict:
    payload = {"kind": kind, "type": type(exc).__name__, "message": str(exc)}
    for attr in ("t", "x", "pair", "residual"):
        if hasattr(exc, attr):
            payload[attr] = _jsonable(getattr(exc, attr))
    return payload


def run(config: RunConfig, *, plot: bool = False, threads: int = 1,
        input_hashes: dict | None = None) -> int:
    """Execute one scenario; always leaves ``run.json`` in the output directory."""
    out_dir = Path(config.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(json.dumps(_error_payload(exc, "config")), file=sys.stderr)
        return EXIT_CONFIG
    errs = validate(config)
    hashes = dict(input_hashes or {})
    hashes["config"] = _sha256(json.dumps(asdict(config), sort_keys=True).encode())
    record = RunRecord(config=_jsonable(asdict(config)), resolved_parameters={}, started=_now(),
                       input_hashes=hashes)
    run_path = out_dir / "run.json"

    def finish(status: str, code: int) -> int:
        record.status = status
        record.finished = _now()
        _atomic_write(run_path, json.dumps(_jsonable(asdict(record)), indent=2) + "\n")
        if record.error is not None:
            print(json.dumps(_jsonable(record.error)), file=sys.stderr)
        return code

    if errs:
        record.error = {"kind": "config", "errors": errs}
        return finish("invalid_config", EXIT_CONFIG)
    params = resolve(config)
    record.resolved_parameters = _jsonable(params)
    outputs = Outputs(out_dir)
    ctx = {"seed": config.seed, "threads": max(1, int(threads))}
    try:
        result = SCENARIOS[config.scenario].run(params, outputs, ctx)
    except _numeric_errors() as exc:
        record.error = _error_payload(exc, "numeric")
        record.error["traceback"] = traceback.format_exc(limit=4)
        record.outputs = outputs.files
        return finish("numeric_failure", EXIT_NUMERIC)
    record.series = _jsonable(result.get("series", {}))
    record.summary = _jsonable(result.get("summary", {}))
    if plot:
        outputs.files.extend(_emit_plots(outputs))
    record.outputs = outputs.files
    return finish("ok", EXIT_OK)


# ---------------------------------------------------------------------------
# command line


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _epilog() -> str:
    lines = ["scenarios and CSV columns:"]
    for name, sc in SCENARIOS.items():
        keys = ", ".join(f"{k}*" if p.default is _REQUIRED else k for k, p in sc.params.items())
        lines.append(f"  {name}")
        lines.append(f"      params: {keys}")
        lines.append(f"      output: {sc.columns}")
    lines.append("(* = required; every scenario also writes run.json)")
    lines.append("exit codes: 0 ok, 2 invalid configuration, 3 numeric failure; LAB_SEED overrides the seed")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lab", description=__doc__, epilog=_epilog(),
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("scenario", help="one of: " + ", ".join(SCENARIOS))
    ap.add_argument("--config", help="JSON file with keys scenario, parameters, output_dir, seed")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override a parameter (repeatable); 'seed' and 'output_dir' are accepted too")
    ap.add_argument("--plot", action="store_true", help="also write SVG line plots")
    ap.add_argument("--threads", type=int, default=1, help="module-internal parallelism (1 = reproducible)")
    ap.add_argument("--out", help="output directory (overrides the config)")
    return ap


class _ConfigError(Exception):
    pass


def load_config(args: argparse.Namespace) -> tuple[RunConfig, dict]:
    raw: dict = {}
    hashes = {}
    if args.config:
        try:
            data = Path(args.config).read_bytes()
            raw = json.loads(data)
        except (OSError, json.JSONDecodeError) as exc:
            raise _ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise _ConfigError("config file must hold a JSON object")
        hashes["config_file"] = _sha256(data)
    bad = [k for k in raw if k not in _TOP_KEYS]
    if bad:
        raise _ConfigError(f"unknown top-level key(s) {bad}")
    if raw.get("scenario", args.scenario) != args.scenario:
        raise _ConfigError(f"config is for scenario {raw['scenario']!r}, not {args.scenario!r}")
    params = dict(raw.get("parameters", {}))
    if not isinstance(params, dict):
        raise _ConfigError("parameters must be a key/value map")
    cfg = RunConfig(args.scenario, params, raw.get("output_dir", "lab_out"), raw.get("seed", 0))
    for item in args.overrides:
        if "=" not in item:
            raise _ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        if k == "seed":
            cfg.seed = _parse_value(v)
        elif k == "output_dir":
            cfg.output_dir = v
        else:
            cfg.parameters[k] = _parse_value(v)
    env_seed = os.environ.get("LAB_SEED")
    if env_seed is not None:
        try:
            cfg.seed = int(env_seed)
        except ValueError as exc:
            raise _ConfigError(f"LAB_SEED must be an integer, got {env_seed!r}") from exc
    if args.out:
        cfg.output_dir = args.out
    return cfg, hashes


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, hashes = load_config(args)
    except _ConfigError as exc:
        print(json.dumps({"kind": "config", "errors": [str(exc)]}), file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg, plot=args.plot, threads=args.threads, input_hashes=hashes)


if __name__ == "__main__":
    sys.exit(main())
