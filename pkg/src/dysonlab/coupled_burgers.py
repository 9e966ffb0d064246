"""Entropy solutions of the coupled Burgers system through its Riemann invariants.

For ``alpha > 0`` the system ``rho_t + (rho u)_x = 0``,
``u_t + (u^2/2 + alpha rho^2/2)_x = 0`` decouples into two inviscid Burgers
equations for ``f_pm = u +- sqrt(alpha) rho``.  Each is advanced with the
Godunov scheme and the pair is reassembled.  A HLL solver for the
isentropic gas with pressure ``alpha rho^3 / 3`` is included for comparison.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import FieldKind, Grid, GridField

__all__ = [
    "CFLError",
    "VacuumError",
    "StateRhoU",
    "Trajectory",
    "Psi",
    "EntropyPairSpec",
    "KineticSlice",
    "to_riemann_invariants",
    "from_riemann_invariants",
    "burgers_flux",
    "burgers_interface_state",
    "exact_riemann_burgers",
    "godunov_step",
    "solve_coupled",
    "kinetic_moment",
    "kinetic_slice",
    "entropy_residual",
    "EntropyResidual",
    "lax_entropy_pair",
    "hamiltonians",
    "energy_density",
    "solve_gas",
    "shock_position",
]

DEFAULT_CFL = 0.45
VACUUM_RHO = 1e-12


class CFLError(ValueError):
    pass


class VacuumError(RuntimeError):
    def __init__(self, message: str, t: float, x: float):
        super().__init__(message)
        self.t = t
        self.x = x


@dataclass(frozen=True, eq=False)
class StateRhoU:
    rho: GridField
    u: GridField
    alpha: float

    def __post_init__(self):
        if self.rho.grid != self.u.grid:
            raise ValueError("rho and u must share a grid")
        if not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        if self.rho.kind is not FieldKind.DENSITY:
            object.__setattr__(self, "rho", self.rho.with_values(self.rho.values, FieldKind.DENSITY))
        if self.u.kind is not FieldKind.VELOCITY:
            object.__setattr__(self, "u", self.u.with_values(self.u.values, FieldKind.VELOCITY))

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    @classmethod
    def from_arrays(cls, grid: Grid, rho, u, alpha: float) -> "StateRhoU":
        return cls(GridField(grid, rho, FieldKind.DENSITY), GridField(grid, u, FieldKind.VELOCITY), alpha)

    @classmethod
    def sample(cls, grid: Grid, rho_fn, u_fn, alpha: float) -> "StateRhoU":
        x = grid.centers
        return cls.from_arrays(grid, np.broadcast_to(rho_fn(x), x.shape),
                               np.broadcast_to(u_fn(x), x.shape), alpha)


def _sqrt_alpha(alpha: float) -> float:
    if not alpha > 0:
        raise ValueError(
            f"alpha = {alpha}: the coupled system is elliptic and ill-posed for alpha <= 0; "
            "use the characteristics module for that regime")
    return math.sqrt(alpha)


def to_riemann_invariants(s: StateRhoU) -> tuple[GridField, GridField]:
    c = _sqrt_alpha(s.alpha)
    rho, u = s.rho.values, s.u.values
    kind = FieldKind.RIEMANN_INVARIANT
    return GridField(s.grid, u + c * rho, kind), GridField(s.grid, u - c * rho, kind)


def from_riemann_invariants(f_plus: GridField, f_minus: GridField, alpha: float) -> StateRhoU:
    c = _sqrt_alpha(alpha)
    fp, fm = f_plus.values, f_minus.values
    if np.any(fp < fm):
        raise ValueError("f_plus < f_minus somewhere: negative density")
    return StateRhoU.from_arrays(f_plus.grid, (fp - fm) / (2.0 * c), 0.5 * (fp + fm), alpha)


# ---------------------------------------------------------------------------
# scalar Burgers


def burgers_interface_state(fl, fr):
    """Value at ``x/t = 0`` of the exact Riemann solution for flux ``v^2/2``."""
    fl = np.asarray(fl, dtype=float)
    fr = np.asarray(fr, dtype=float)
    shock = fl > fr
    s = 0.5 * (fl + fr)
    v_shock = np.where(s > 0, fl, fr)
    v_rare = np.where(fl >= 0, fl, np.where(fr <= 0, fr, 0.0))
    return np.where(shock, v_shock, v_rare)


def burgers_flux(fl, fr):
    """Exact Godunov flux for ``v^2/2`` (sonic rarefactions give zero)."""
    v = burgers_interface_state(fl, fr)
    return 0.5 * v * v


def exact_riemann_burgers(fl: float, fr: float, xi):
    """Self-similar solution of Burgers with data ``fl`` / ``fr`` at ``xi = x/t``."""
    xi = np.asarray(xi, dtype=float)
    if fl > fr:
        return np.where(xi < 0.5 * (fl + fr), fl, fr)
    return np.clip(xi, fl, fr)


def _pad(v: np.ndarray, bc: str) -> np.ndarray:
    if bc == "outflow":
        return np.concatenate([[v[0]], v, [v[-1]]])
    if bc == "periodic":
        return np.concatenate([[v[-1]], v, [v[0]]])
    raise ValueError(f"unknown boundary condition {bc!r}")


def _godunov_update(v: np.ndarray, lam: float, bc: str) -> np.ndarray:
    p = _pad(v, bc)
    flux = burgers_flux(p[:-1], p[1:])
    return v - lam * (flux[1:] - flux[:-1])


def godunov_step(f: GridField, dt: float, *, bc: str = "outflow") -> GridField:
    """One conservative Godunov step; raises :class:`CFLError` if ``dt max|f| / dx > 1``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    dx = f.grid.dx
    c = dt * float(np.max(np.abs(f.values))) / dx
    if c > 1.0:
        raise CFLError(f"CFL number {c:.3g} exceeds 1")
    return f.with_values(_godunov_update(f.values, dt / dx, bc))


# ---------------------------------------------------------------------------
# trajectories


@dataclass(eq=False)
class Trajectory:
    """Samples of a coupled-Burgers (or gas) run.

    ``rho``, ``u`` have shape ``(n_times, n_cells)``.  For coupled runs
    ``f_plus`` and ``f_minus`` are stored too.
    """

    grid: Grid
    alpha: float
    times: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    f_plus: np.ndarray | None = None
    f_minus: np.ndarray | None = None
    bc: str = "outflow"
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> StateRhoU:
        return StateRhoU.from_arrays(self.grid, np.clip(self.rho[i], 0.0, None), self.u[i], self.alpha)

    @property
    def final(self) -> StateRhoU:
        return self.state(len(self.times) - 1)

    def to_csv(self, path: str | Path) -> None:
        fp = self.f_plus if self.f_plus is not None else self.u + math.sqrt(self.alpha) * self.rho
        fm = self.f_minus if self.f_minus is not None else self.u - math.sqrt(self.alpha) * self.rho
        x = self.grid.centers
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "rho", "u", "f_plus", "f_minus"])
            for i, t in enumerate(self.times):
                for j in range(x.size):
                    w.writerow([repr(float(t)), repr(float(x[j])), repr(float(self.rho[i, j])),
                                repr(float(self.u[i, j])), repr(float(fp[i, j])), repr(float(fm[i, j]))])


def _output_schedule(T: float, out_times) -> np.ndarray:
    if out_times is None:
        return np.array([T])
    ts = np.unique(np.asarray(out_times, dtype=float))
    if np.any(ts < 0) or np.any(ts > T):
        raise ValueError("output times must lie in [0, T]")
    return ts


def solve_coupled(initial: StateRhoU, T: float, *, cfl: float = DEFAULT_CFL, bc: str = "outflow",
                  out_times=None, every_step: bool = False) -> Trajectory:
    """Evolve ``f_pm`` by Godunov to time ``T`` and reassemble ``(rho, u)``.

    Samples are taken at ``out_times`` (default: ``T`` only; ``t = 0`` is always
    stored).  With ``every_step`` every time level is stored, which the entropy
    residual needs.
    """
    c = _sqrt_alpha(initial.alpha)
    if not T > 0:
        raise ValueError("T must be positive")
    if not 0 < cfl <= 1:
        raise CFLError(f"CFL number {cfl} outside (0, 1]")
    grid = initial.grid
    dx = grid.dx
    fp_field, fm_field = to_riemann_invariants(initial)
    fp, fm = fp_field.values.copy(), fm_field.values.copy()
    sched = _output_schedule(T, out_times)
    times, fps, fms = [0.0], [fp.copy()], [fm.copy()]
    t = 0.0
    k = 0
    while t < T * (1 - 1e-14):
        vmax = max(float(np.max(np.abs(fp))), float(np.max(np.abs(fm))))
        dt = cfl * dx / vmax if vmax > 0 else T - t
        while k < sched.size and sched[k] <= t * (1 + 1e-14):
            k += 1
        nxt = sched[k] if k < sched.size else T
        last = t + dt >= nxt * (1 - 1e-14)
        if last:
            dt = nxt - t
        if dt * vmax / dx > 1.0:
            raise CFLError(f"CFL violation at t = {t}")
        lam = dt / dx
        fp = _godunov_update(fp, lam, bc)
        fm = _godunov_update(fm, lam, bc)
        t = nxt if last else t + dt
        if np.any(fp < fm):
            bad = int(np.argmax(fm - fp))
            # Godunov is monotone, so this is only ever rounding
            if fm[bad] - fp[bad] > 1e-12 * max(1.0, abs(fp[bad])):
                raise RuntimeError(f"f_plus < f_minus at x = {grid.centers[bad]}, t = {t}")
            fm = np.minimum(fm, fp)
        if every_step or (last and np.any(np.abs(sched - t) <= 1e-14 * max(1.0, T))):
            times.append(t)
            fps.append(fp.copy())
            fms.append(fm.copy())
    fpa, fma = np.array(fps), np.array(fms)
    return Trajectory(grid, initial.alpha, np.array(times), (fpa - fma) / (2 * c), 0.5 * (fpa + fma),
                      fpa, fma, bc, {"solver": "godunov", "cfl": cfl})


# ---------------------------------------------------------------------------
# kinetic formulation


_KINETIC_KINDS = ("chi", "chi_hat", "chi_plus", "chi_minus")


def kinetic_moment(f_minus, f_plus, k: int, which: str, alpha: float = 1.0):
    """``int v^k chi dv`` in closed form for the equilibrium indicators.

    ``chi_pm = H(v) - H(v - f_pm)``, ``chi = (chi_+ - chi_-) / (2 sqrt(alpha))``
    and ``chi_hat = (chi_+ + chi_-) / 2``.
    """
    if int(k) != k or k < 0:
        raise ValueError("k must be a nonnegative integer")
    if which not in _KINETIC_KINDS:
        raise ValueError(f"unknown distribution {which!r}")
    fm = np.asarray(f_minus, dtype=float)
    fp = np.asarray(f_plus, dtype=float)
    mp = fp ** (k + 1) / (k + 1)
    mm = fm ** (k + 1) / (k + 1)
    if which == "chi_plus":
        return mp
    if which == "chi_minus":
        return mm
    if which == "chi":
        if np.any(fp < fm):
            raise ValueError("chi needs f_plus >= f_minus")
        return (mp - mm) / (2.0 * _sqrt_alpha(alpha))
    return 0.5 * (mp + mm)


@dataclass(frozen=True, eq=False)
class KineticSlice:
    """Cell averages of ``chi_pm`` on a velocity grid at one point ``(x, t)``.

    Values are ``+1`` on ``(0, f)`` for ``f > 0`` and ``-1`` on ``(f, 0)`` for
    ``f < 0``; the cells containing ``0`` or ``f`` hold the exact fraction.
    """

    v_grid: Grid
    chi_plus: np.ndarray
    chi_minus: np.ndarray
    alpha: float

    @property
    def chi(self) -> np.ndarray:
        return (self.chi_plus - self.chi_minus) / (2.0 * math.sqrt(self.alpha))

    @property
    def chi_hat(self) -> np.ndarray:
        return 0.5 * (self.chi_plus + self.chi_minus)

    def moment(self, which: str, k: int) -> float:
        """Exact ``int v^k chi dv`` of the piecewise-constant cell averages."""
        g = self.v_grid
        faces = g.faces
        vals = {"chi_plus": self.chi_plus, "chi_minus": self.chi_minus,
                "chi": self.chi, "chi_hat": self.chi_hat}[which]
        seg = (faces[1:] ** (k + 1) - faces[:-1] ** (k + 1)) / (k + 1)
        return float(np.sum(vals * seg))


def _indicator_cells(f: float, faces: np.ndarray, dx: float) -> np.ndarray:
    lo, hi = (0.0, f) if f >= 0 else (f, 0.0)
    overlap = np.clip(np.minimum(faces[1:], hi) - np.maximum(faces[:-1], lo), 0.0, None)
    return math.copysign(1.0, f) * overlap / dx


def kinetic_slice(f_minus: float, f_plus: float, v_grid: Grid, alpha: float) -> KineticSlice:
    if f_plus < f_minus:
        raise ValueError("need f_plus >= f_minus")
    _sqrt_alpha(alpha)
    faces = v_grid.faces
    return KineticSlice(v_grid, _indicator_cells(f_plus, faces, v_grid.dx),
                        _indicator_cells(f_minus, faces, v_grid.dx), alpha)


# ---------------------------------------------------------------------------
# entropy pairs


@dataclass(frozen=True, eq=False)
class Psi:
    """Convex entropy generator ``psi`` and its flux ``phi`` with ``phi' = v psi'``.

    Builtins: ``square`` (``v^2/2``), ``exp_k`` (``exp(k v)``, parameter k) and
    ``abs_shifted`` (``|v - c|``, parameter c).  ``tabulated`` takes samples of
    psi on an increasing grid; it is interpolated linearly and ``phi`` is
    obtained by quadrature of ``v psi'``.
    """

    kind: str = "square"
    param: float = 1.0
    table_v: np.ndarray | None = None
    table_psi: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("square", "exp_k", "abs_shifted", "tabulated"):
            raise ValueError(f"unknown psi {self.kind!r}")
        if self.kind == "exp_k" and self.param == 0:
            raise ValueError("exp_k needs k != 0")
        if self.kind == "tabulated":
            v = np.asarray(self.table_v, dtype=float)
            p = np.asarray(self.table_psi, dtype=float)
            if v.ndim != 1 or v.shape != p.shape or v.size < 3 or np.any(np.diff(v) <= 0):
                raise ValueError("tabulated psi needs increasing v and matching values (>= 3)")
            slopes = np.diff(p) / np.diff(v)
            if np.any(np.diff(slopes) < -1e-12):
                raise ValueError("tabulated psi is not convex")
            # phi' = v psi' integrated exactly on each linear piece
            dphi = slopes * 0.5 * (v[1:] ** 2 - v[:-1] ** 2)
            phi = np.concatenate([[0.0], np.cumsum(dphi)])
            object.__setattr__(self, "table_v", v)
            object.__setattr__(self, "table_psi", p)
            object.__setattr__(self, "_phi", phi)

    def psi(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "square":
            return 0.5 * v * v
        if self.kind == "exp_k":
            return np.exp(self.param * v)
        if self.kind == "abs_shifted":
            return np.abs(v - self.param)
        self._check_range(v)
        return np.interp(v, self.table_v, self.table_psi)

    def phi(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "square":
            return v ** 3 / 3.0
        if self.kind == "exp_k":
            k = self.param
            return (k * v - 1.0) * np.exp(k * v) / k
        if self.kind == "abs_shifted":
            c = self.param
            return np.sign(v - c) * 0.5 * (v * v - c * c)
        self._check_range(v)
        tv = self.table_v
        j = np.clip(np.searchsorted(tv, v, side="right") - 1, 0, tv.size - 2)
        slope = (self.table_psi[j + 1] - self.table_psi[j]) / (tv[j + 1] - tv[j])
        return self._phi[j] + slope * 0.5 * (v * v - tv[j] ** 2)

    def _check_range(self, v):
        if np.any(v < self.table_v[0] - 1e-12) or np.any(v > self.table_v[-1] + 1e-12):
            raise ValueError("argument outside the tabulated range")


@dataclass(frozen=True, eq=False)
class EntropyPairSpec:
    """``eta = k1 psi1(f_+) + k2 psi2(f_-)``, ``q = k1 phi1(f_+) + k2 phi2(f_-)``."""

    psi1: Psi | str = "square"
    psi2: Psi | str = "square"
    k1: float = 1.0
    k2: float = 0.0

    def __post_init__(self):
        if self.k1 < 0 or self.k2 < 0:
            raise ValueError("k1 and k2 must be nonnegative")
        for name in ("psi1", "psi2"):
            p = getattr(self, name)
            if isinstance(p, str):
                object.__setattr__(self, name, Psi(p))

    def eta(self, f_plus, f_minus):
        return self.k1 * self.psi1.psi(f_plus) + self.k2 * self.psi2.psi(f_minus)

    def q(self, f_plus, f_minus):
        return self.k1 * self.psi1.phi(f_plus) + self.k2 * self.psi2.phi(f_minus)


def lax_entropy_pair(rho, u, alpha: float, k: float):
    """Lax entropy ``(e^{k f_+} - e^{k f_-}) / (2 sqrt(alpha) k)`` and its flux."""
    if k == 0:
        raise ValueError("k must be nonzero")
    c = _sqrt_alpha(alpha)
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    fp, fm = u + c * rho, u - c * rho
    eta = (np.exp(k * fp) - np.exp(k * fm)) / (2 * c * k)
    q = ((k * fp - 1) * np.exp(k * fp) - (k * fm - 1) * np.exp(k * fm)) / (2 * c * k * k)
    return eta, q


@dataclass(eq=False)
class EntropyResidual:
    """Cell residuals ``d_t eta + d_x q`` (cell integrals) for each step interval."""

    t_mid: np.ndarray
    residual: np.ndarray  # (n_steps, n_cells), per unit length
    dx: float

    @property
    def max_positive(self) -> float:
        return float(max(np.max(self.residual), 0.0))

    @property
    def total_rate(self) -> np.ndarray:
        """``d/dt int eta + boundary flux`` per step (the integrated residual)."""
        return self.residual.sum(axis=1) * self.dx

    def fields(self, grid: Grid) -> list[GridField]:
        return [GridField(grid, r) for r in self.residual]


def entropy_residual(traj: Trajectory, pair: EntropyPairSpec) -> EntropyResidual:
    """Discrete entropy production of a Godunov trajectory stored at every step.

    For cell ``j`` between levels ``n`` and ``n+1``:
    ``(eta_j^{n+1} - eta_j^n)/dt + (Q_{j+1/2} - Q_{j-1/2})/dx`` with
    ``Q`` the entropy flux of the Godunov interface states at level ``n``.
    """
    if traj.f_plus is None or traj.meta.get("solver") != "godunov":
        raise ValueError("entropy residual needs a Godunov trajectory")
    if len(traj.times) < 2:
        raise ValueError("trajectory has fewer than two time levels")
    fp, fm = traj.f_plus, traj.f_minus
    dts = np.diff(traj.times)
    eta = pair.eta(fp, fm)
    res = np.empty((dts.size, traj.grid.n_cells))
    for n in range(dts.size):
        pp, pm = _pad(fp[n], traj.bc), _pad(fm[n], traj.bc)
        qs = pair.q(burgers_interface_state(pp[:-1], pp[1:]),
                    burgers_interface_state(pm[:-1], pm[1:]))
        res[n] = (eta[n + 1] - eta[n]) / dts[n] + (qs[1:] - qs[:-1]) / traj.grid.dx
    return EntropyResidual(0.5 * (traj.times[1:] + traj.times[:-1]), res, traj.grid.dx)


# ---------------------------------------------------------------------------
# conserved quantities


def energy_density(rho, u, alpha: float):
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    return 0.5 * rho * u * u + alpha * rho ** 3 / 6.0


def hamiltonians(s: StateRhoU) -> dict[str, float]:
    """``H1 = int u^3/6 + alpha rho^2 u / 2``, ``H2 = int rho u^2/2 + alpha rho^3/6``."""
    rho, u, a, dx = s.rho.values, s.u.values, s.alpha, s.grid.dx
    return {
        "mass": float(np.sum(rho) * dx),
        "H1": float(np.sum(u ** 3 / 6.0 + 0.5 * a * rho * rho * u) * dx),
        "H2": float(np.sum(0.5 * rho * u * u + a * rho ** 3 / 6.0) * dx),
        "energy": float(np.sum(energy_density(rho, u, a)) * dx),
    }


# ---------------------------------------------------------------------------
# isentropic gas


def _gas_flux(rho, m, alpha):
    u = m / rho
    return m, m * u + alpha * rho ** 3 / 3.0


def solve_gas(initial: StateRhoU, T: float, *, cfl: float = DEFAULT_CFL, bc: str = "outflow",
              out_times=None) -> Trajectory:
    """HLL finite volumes for ``rho_t + m_x = 0``, ``m_t + (m^2/rho + alpha rho^3/3)_x = 0``.

    Sound speed is ``sqrt(alpha) rho``.  Aborts with :class:`VacuumError` if the
    density drops below ``1e-12``.
    """
    alpha = initial.alpha
    c = _sqrt_alpha(alpha)
    rho = initial.rho.values.copy()
    if np.min(rho) < VACUUM_RHO:
        raise VacuumError("gas solver needs strictly positive density", 0.0,
                          float(initial.grid.centers[int(np.argmin(rho))]))
    m = rho * initial.u.values
    grid = initial.grid
    dx = grid.dx
    sched = _output_schedule(T, out_times)
    times, rhos, us = [0.0], [rho.copy()], [m / rho]
    t = 0.0
    k = 0
    while t < T * (1 - 1e-14):
        u = m / rho
        smax = float(np.max(np.abs(u) + c * rho))
        dt = cfl * dx / smax
        while k < sched.size and sched[k] <= t * (1 + 1e-14):
            k += 1
        nxt = sched[k] if k < sched.size else T
        last = t + dt >= nxt * (1 - 1e-14)
        if last:
            dt = nxt - t
        pr, pm = _pad(rho, bc), _pad(m, bc)
        rl, rr, ml, mr = pr[:-1], pr[1:], pm[:-1], pm[1:]
        ul, ur = ml / rl, mr / rr
        sl = np.minimum(ul - c * rl, ur - c * rr)
        sr = np.maximum(ul + c * rl, ur + c * rr)
        f1l, f2l = _gas_flux(rl, ml, alpha)
        f1r, f2r = _gas_flux(rr, mr, alpha)

        def hll(fl, fr, ql, qr):
            mid = (sr * fl - sl * fr + sl * sr * (qr - ql)) / (sr - sl)
            return np.where(sl >= 0, fl, np.where(sr <= 0, fr, mid))

        F1 = hll(f1l, f1r, rl, rr)
        F2 = hll(f2l, f2r, ml, mr)
        lam = dt / dx
        rho = rho - lam * (F1[1:] - F1[:-1])
        m = m - lam * (F2[1:] - F2[:-1])
        t = nxt if last else t + dt
        if np.min(rho) < VACUUM_RHO:
            j = int(np.argmin(rho))
            raise VacuumError(f"vacuum formed at x = {grid.centers[j]:.6g}, t = {t:.6g}",
                              t, float(grid.centers[j]))
        if last and np.any(np.abs(sched - t) <= 1e-14 * max(1.0, T)):
            times.append(t)
            rhos.append(rho.copy())
            us.append(m / rho)
    return Trajectory(grid, alpha, np.array(times), np.array(rhos), np.array(us), bc=bc,
                      meta={"solver": "hll", "cfl": cfl})


def shock_position(x, values, *, x_range: tuple[float, float] | None = None) -> float:
    """Location of the steepest drop of ``values`` (midpoint of the steepest face)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(values, dtype=float)
    jumps = v[:-1] - v[1:]
    mids = 0.5 * (x[:-1] + x[1:])
    if x_range is not None:
        sel = (mids >= x_range[0]) & (mids <= x_range[1])
        jumps = np.where(sel, jumps, -np.inf)
    return float(mids[int(np.argmax(jumps))])
