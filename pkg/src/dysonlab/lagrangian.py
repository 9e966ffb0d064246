"""Lagrangian (mass-coordinate) dynamics, the nearest-neighbour chain and Calogero-Moser.

Sign convention: ``alpha > 0`` is the hyperbolic case, where the continuum
equation ``X_tt = alpha X_xixi / X_xi^4`` describes a pressure that pushes
particles apart.  The chain forces below are the ones whose continuum limit is
exactly that equation:

* nearest neighbour: ``v_j' = alpha/(3 N^2) [(x_j - x_{j+1})^-3 + (x_j - x_{j-1})^-3]``
* Calogero-Moser:    ``v_j' = 2 alpha/(N^2 pi^2) sum_{k != j} (x_j - x_k)^-3``

Each particle carries mass ``1/N`` and momentum ``p_j = v_j / N``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .analysis import GridField

__all__ = [
    "OrderingError",
    "FlowMapState",
    "ChainState",
    "SmoothProfile",
    "flow_map_from_density",
    "chain_forces",
    "chain_hamiltonian",
    "chain_momentum",
    "step_chain",
    "run_chain",
    "pde_forces",
    "step_lagrangian_pde",
    "discrete_action",
    "action_directional_derivative",
    "continuum_limit_residual",
    "dyson_vs_cm_bridge",
]

MAX_HALVINGS = 60
GAP_FLOOR = 1e-10


class OrderingError(RuntimeError):
    def __init__(self, message: str, t: float | None = None, pair: tuple[int, int] | None = None):
        super().__init__(message)
        self.t = t
        self.pair = pair


def _check_increasing(x: np.ndarray, what: str) -> None:
    if x.size > 1 and np.any(np.diff(x) <= 0):
        j = int(np.argmin(np.diff(x)))
        raise OrderingError(f"{what} not strictly increasing at index {j}", pair=(j, j + 1))


# ---------------------------------------------------------------------------
# flow maps


@dataclass(frozen=True, eq=False)
class FlowMapState:
    """Positions ``X(xi_j)`` and velocities at labels ``xi_j = (j + 1/2)/M``.

    ``period`` is ``None`` for a free chain; otherwise the labels wrap with
    ``X(xi + 1) = X(xi) + period``.
    """

    X: np.ndarray
    V: np.ndarray
    alpha: float
    t: float = 0.0
    period: float | None = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        V = np.array(self.V, dtype=float)
        if X.ndim != 1 or X.shape != V.shape or X.size < 2:
            raise ValueError("X and V must be 1-D arrays of equal length >= 2")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(V))):
            raise ValueError("X and V must be finite")
        _check_increasing(X, "X")
        if self.period is not None and not X[-1] - X[0] < self.period:
            raise OrderingError("periodic flow map overlaps its own image")
        X.setflags(write=False)
        V.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "V", V)

    @property
    def M(self) -> int:
        return self.X.size

    @property
    def xi(self) -> np.ndarray:
        return (np.arange(self.M) + 0.5) / self.M

    @property
    def tau(self) -> np.ndarray:
        """Specific volume ``dX/dxi`` on the faces ``j + 1/2`` (M - 1 or M values)."""
        return _face_gaps(self.X, self.period) * self.M

    def density(self) -> tuple[np.ndarray, np.ndarray]:
        """Face midpoints and ``1 / tau`` there."""
        gaps = _face_gaps(self.X, self.period)
        ext = np.concatenate([self.X, [self.X[0] + self.period]]) if self.period else self.X
        return 0.5 * (ext[:-1] + ext[1:]), 1.0 / (gaps * self.M)

    def to_csv(self, path: str | Path, mode: str = "w") -> None:
        tau = self.tau
        if tau.size < self.M:
            tau = np.concatenate([tau, [np.nan]])
        with open(path, mode, newline="") as fh:
            w = csv.writer(fh)
            if mode == "w":
                w.writerow(["t", "xi", "X", "V", "tau"])
            for j in range(self.M):
                w.writerow([repr(self.t), repr(float(self.xi[j])), repr(float(self.X[j])),
                            repr(float(self.V[j])), repr(float(tau[j]))])


def _face_gaps(X: np.ndarray, period: float | None) -> np.ndarray:
    if period is None:
        return np.diff(X)
    return np.diff(np.concatenate([X, [X[0] + period]]))


def flow_map_from_density(rho0: GridField, M: int, *, alpha: float = 1.0, u0=None,
                          periodic: bool = False) -> FlowMapState:
    """Invert the cumulative mass of ``rho0`` at labels ``(j + 1/2)/M``.

    ``rho0`` is read as piecewise constant on its cells, so the cumulative
    mass is piecewise linear through the face values and the inverse is exact
    for such data.  ``u0`` is an optional callable giving ``V = u0(X)``.
    """
    if M < 2:
        raise ValueError("M must be >= 2")
    rho = rho0.values
    if np.any(rho < 0):
        raise ValueError("density must be nonnegative")
    pos = np.nonzero(rho > 0)[0]
    if pos.size == 0:
        raise ValueError("density vanishes identically")
    if np.any(rho[pos[0]:pos[-1] + 1] <= 0):
        raise ValueError("density has a zero inside its support")
    g = rho0.grid
    Z = np.concatenate([[0.0], np.cumsum(rho * g.dx)])
    mass = Z[-1]
    if abs(mass - 1.0) > 1e-6:
        raise ValueError(f"total mass {mass:.12g} differs from 1 by more than 1e-6")
    Z = Z / mass
    faces = g.faces
    xi = (np.arange(M) + 0.5) / M
    # bracket each label between consecutive strictly increasing face values
    j = np.clip(np.searchsorted(Z, xi, side="right") - 1, 0, g.n_cells - 1)
    frac = (xi - Z[j]) / (Z[j + 1] - Z[j])
    X = faces[j] + frac * g.dx
    V = np.zeros(M) if u0 is None else np.asarray(u0(X), dtype=float) * np.ones(M)
    return FlowMapState(X, V, alpha, 0.0, g.length if periodic else None)


# ---------------------------------------------------------------------------
# chains


@dataclass(frozen=True, eq=False)
class ChainState:
    positions: np.ndarray
    velocities: np.ndarray
    alpha: float
    model: str = "fput"
    t: float = 0.0

    def __post_init__(self):
        if self.model not in ("fput", "calogero_moser"):
            raise ValueError(f"unknown model {self.model!r}")
        x = np.array(self.positions, dtype=float)
        v = np.array(self.velocities, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.size < 2:
            raise ValueError("positions and velocities must be 1-D arrays of equal length >= 2")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise ValueError("positions and velocities must be finite")
        _check_increasing(x, "positions")
        x.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)

    @property
    def N(self) -> int:
        return self.positions.size

    @property
    def momenta(self) -> np.ndarray:
        return self.velocities / self.N


def chain_forces(x, alpha: float, model: str) -> np.ndarray:
    """Accelerations ``v_j'`` of the nearest-neighbour or Calogero-Moser chain."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if model == "fput":
        inv = np.diff(x) ** -3.0
        f = np.zeros(n)
        f[:-1] -= inv
        f[1:] += inv
        return alpha / (3.0 * n * n) * f
    if model == "calogero_moser":
        d = x[:, None] - x[None, :]
        np.fill_diagonal(d, np.inf)
        return 2.0 * alpha / (n * n * math.pi ** 2) * (d ** -3.0).sum(axis=1)
    raise ValueError(f"unknown model {model!r}")


def _potential(x: np.ndarray, alpha: float, model: str) -> float:
    n = x.size
    if model == "fput":
        return alpha / (6.0 * n ** 3) * float(np.sum(np.diff(x) ** -2.0))
    d = x[:, None] - x[None, :]
    np.fill_diagonal(d, np.inf)
    return alpha / (2.0 * n ** 3 * math.pi ** 2) * float(np.sum(d ** -2.0))


def chain_hamiltonian(state: ChainState) -> float:
    """``(N/2) sum p^2 + U`` with ``p = v/N``."""
    p = state.momenta
    return 0.5 * state.N * float(np.sum(p * p)) + _potential(state.positions, state.alpha, state.model)


def chain_momentum(state: ChainState) -> float:
    return float(np.sum(state.momenta))


def _verlet(x, v, a, dt, alpha, model):
    vh = v + 0.5 * dt * a
    xn = x + dt * vh
    an = chain_forces(xn, alpha, model)
    return xn, vh + 0.5 * dt * an, an


def _gap_ok(x, floor):
    return bool(np.min(np.diff(x)) > floor)


def step_chain(state: ChainState, dt: float) -> ChainState:
    """One velocity-Verlet step of size ``dt``.

    A sub-step that would lose ordering is retried at half the size, from the
    last accepted point; the sub-step size grows back after each success.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    x, v = state.positions, state.velocities
    floor = GAP_FLOOR * float(x[-1] - x[0])
    a = chain_forces(x, state.alpha, state.model)
    done, depth = 0.0, 0
    while done < dt:
        h = min(dt / 2 ** depth, dt - done)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn, vn, an = _verlet(x, v, a, h, state.alpha, state.model)
        if np.all(np.isfinite(xn)) and _gap_ok(xn, floor):
            x, v, a = xn, vn, an
            done += h
            depth = max(depth - 1, 0)
            continue
        depth += 1
        if depth > MAX_HALVINGS:
            j = int(np.argmin(np.diff(x)))
            raise OrderingError(f"ordering lost after {MAX_HALVINGS} halvings at t = {state.t + done}",
                                state.t + done, (j, j + 1))
    return ChainState(x, v, state.alpha, state.model, state.t + dt)


def run_chain(state: ChainState, dt: float, n_steps: int, *, record_every: int = 1):
    """Repeated :func:`step_chain`; returns the final state and a dict of series."""
    times, H, P = [state.t], [chain_hamiltonian(state)], [chain_momentum(state)]
    snaps = [state]
    for k in range(1, n_steps + 1):
        state = step_chain(state, dt)
        if k % record_every == 0 or k == n_steps:
            times.append(state.t)
            H.append(chain_hamiltonian(state))
            P.append(chain_momentum(state))
            snaps.append(state)
    return state, {"t": np.array(times), "H": np.array(H), "P": np.array(P), "states": snaps}


# ---------------------------------------------------------------------------
# Lagrangian PDE


def pde_forces(X: np.ndarray, alpha: float, period: float | None) -> np.ndarray:
    """``-(alpha/3) [tau_{j+1/2}^-3 - tau_{j-1/2}^-3] / dxi``; free ends carry zero pressure."""
    M = X.size
    tau = _face_gaps(X, period) * M
    p = tau ** -3.0
    if period is None:
        right = np.concatenate([p, [0.0]])
        left = np.concatenate([[0.0], p])
    else:
        right = p
        left = np.roll(p, 1)
    return -(alpha / 3.0) * (right - left) * M


def step_lagrangian_pde(state: FlowMapState, dt: float) -> FlowMapState:
    """Velocity-Verlet step of ``X_tt = -(alpha/3) (X_xi^-3)_xi`` with a monotonicity guard.

    With free ends this coincides with the nearest-neighbour chain on the
    same particles.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    X, V, alpha, period = state.X, state.V, state.alpha, state.period
    a = pde_forces(X, alpha, period)
    done, depth = 0.0, 0
    while done < dt:
        h = min(dt / 2 ** depth, dt - done)
        vh = V + 0.5 * h * a
        xn = X + h * vh
        if np.all(np.isfinite(xn)) and np.min(_face_gaps(xn, period)) > 0:
            an = pde_forces(xn, alpha, period)
            X, V, a = xn, vh + 0.5 * h * an, an
            done += h
            depth = max(depth - 1, 0)
            continue
        depth += 1
        if depth > MAX_HALVINGS:
            raise OrderingError(
                f"monotonicity of X lost near t = {state.t + done:.6g} (shock in mass coordinates)",
                state.t + done)
    return replace(state, X=X, V=V, t=state.t + dt)


def discrete_action(X_traj, dt: float, alpha: float, period: float | None = None) -> float:
    """``sum_n dt sum_j dxi [ (1/2)((X^{n+1}-X^n)/dt)^2 - (alpha/6) (tau^n)^-2 ]``.

    The potential sum runs over faces and over levels ``n = 0 .. T-1``
    together with a half weight at both ends (trapezoid in time).  Velocity
    Verlet is the exact stationary point of this sum for fixed end states.
    """
    X = np.asarray(X_traj, dtype=float)
    M = X.shape[1]
    kin = 0.5 * np.sum(((X[1:] - X[:-1]) / dt) ** 2) / M * dt
    pot = np.array([alpha / 6.0 * np.sum((_face_gaps(x, period) * M) ** -2.0) / M for x in X])
    w = np.ones(len(X))
    w[0] = w[-1] = 0.5
    return float(kin - dt * np.sum(w * pot))


def action_directional_derivative(X_traj, dt: float, alpha: float, direction,
                                  period: float | None = None, eps: float = 1e-8) -> float:
    """Centred difference of :func:`discrete_action` along ``direction``.

    The first and last time levels of ``direction`` are zeroed (fixed ends);
    the result is normalised by the discrete L2 norm of the direction.
    """
    X = np.asarray(X_traj, dtype=float)
    Y = np.array(direction, dtype=float)
    Y[0] = 0.0
    Y[-1] = 0.0
    norm = math.sqrt(float(np.sum(Y * Y)) * dt / X.shape[1])
    if norm == 0:
        raise ValueError("direction vanishes in the interior")
    Y /= norm
    ap = discrete_action(X + eps * Y, dt, alpha, period)
    am = discrete_action(X - eps * Y, dt, alpha, period)
    return (ap - am) / (2.0 * eps)


# ---------------------------------------------------------------------------
# continuum limit


@dataclass(frozen=True)
class SmoothProfile:
    """``X(xi) = slope xi + offset + amp sin(2 pi xi)``; monotone while ``2 pi |amp| < slope``."""

    amp: float = 0.1
    slope: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if not self.slope > 2 * math.pi * abs(self.amp):
            raise ValueError("profile is not monotone")

    def X(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.slope * xi + self.offset + self.amp * np.sin(2 * math.pi * xi)

    def X_xi(self, xi):
        return self.slope + 2 * math.pi * self.amp * np.cos(2 * math.pi * np.asarray(xi, dtype=float))

    def X_xixi(self, xi):
        return -(2 * math.pi) ** 2 * self.amp * np.sin(2 * math.pi * np.asarray(xi, dtype=float))

    def continuum_force(self, xi, alpha: float):
        return alpha * self.X_xixi(xi) / self.X_xi(xi) ** 4


def continuum_limit_residual(profile: SmoothProfile, N_list, *, alpha: float = 1.0,
                             model: str = "fput") -> dict:
    """``max_j |F_j - alpha X_xixi / X_xi^4 (xi_j)|`` for each ``N``.

    Particles sit at ``xi_j = (j + 1/2)/N``.  Nearest-neighbour residuals are
    taken over ``2 <= j <= N - 1`` (1-based); Calogero-Moser residuals over the
    middle half, away from the end layers of the long-range sum.  The fitted
    order is the negated least-squares slope of log residual against log N.
    """
    Ns = [int(n) for n in N_list]
    if min(Ns) < 8:
        raise ValueError("N must be >= 8")
    res = []
    for n in Ns:
        xi = (np.arange(n) + 0.5) / n
        F = chain_forces(profile.X(xi), alpha, model)
        target = profile.continuum_force(xi, alpha)
        if model == "fput":
            sel = slice(1, n - 1)
        else:
            sel = slice(n // 4, n - n // 4)
        res.append(float(np.max(np.abs(F[sel] - target[sel]))))
    r = np.array(res)
    if np.all(r > 0) and len(Ns) > 1:
        order = float(-np.polyfit(np.log(Ns), np.log(r), 1)[0])
    else:
        order = math.inf
    return {"N": Ns, "residual": res, "fitted_order": order, "model": model}


# ---------------------------------------------------------------------------
# Dyson / Calogero-Moser bridge


def dyson_vs_cm_bridge(N: int, t: float, *, t0: float = 0.05, dt_cm: float = 1e-4) -> dict:
    """Deterministic Dyson particles versus Calogero-Moser with ``alpha = -pi^2``.

    Both start at ``t0`` from the quantiles of the radius ``2 sqrt(t0)``
    semicircle; the Calogero-Moser velocities are the Dyson drift there, which
    makes ``H = 0``.  That orbit is unstable for the second-order system, so for
    larger ``N`` the chain can lose ordering before ``t``; the report then
    carries ``cm_breakdown_t`` and the chain state reached.  Energy drift is
    measured against the initial kinetic energy.
    """
    from .dyson_particles import ParticleState, drift_array, step_deterministic, w1_to_semicircle
    from .oracles import SemicircleLaw

    if N < 16:
        raise ValueError("N must be >= 16")
    if not t > t0:
        raise ValueError("t must exceed t0")
    lam0 = SemicircleLaw(2.0 * math.sqrt(t0)).quantile((np.arange(N) + 0.5) / N)
    dyson = step_deterministic(ParticleState(lam0, 0.0, t0), t - t0, tol=1e-7)
    n_steps = max(1, int(math.ceil((t - t0) / dt_cm)))
    h = (t - t0) / n_steps
    chain = ChainState(lam0, drift_array(lam0, 0.0), -math.pi ** 2, "calogero_moser", t0)
    H0 = chain_hamiltonian(chain)
    K0 = 0.5 * float(np.sum(chain.velocities ** 2)) / N
    breakdown = None
    for _ in range(n_steps):
        try:
            chain = step_chain(chain, h)
        except OrderingError as exc:
            breakdown = exc.t
            break
    r = 2.0 * math.sqrt(t)
    return {
        "N": N,
        "t": t,
        "t0": t0,
        "w1_dyson": w1_to_semicircle(dyson.positions, r),
        "w1_cm": w1_to_semicircle(chain.positions, r),
        "max_position_gap": float(np.max(np.abs(dyson.positions - chain.positions))),
        "H_drift_over_K0": float(abs(chain_hamiltonian(chain) - H0) / K0),
        "cm_reached_t": chain.t,
        "cm_breakdown_t": breakdown,
        "x": dyson.positions.tolist(),
        "x_cm": chain.positions.tolist(),
    }
