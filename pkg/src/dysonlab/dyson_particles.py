"""Deterministic and stochastic Dyson particle systems.

Positions ``lam`` evolve by

    d lam_j = [ (1/N) sum_{k != j} 1 / (lam_j - lam_k) - gamma lam_j ] dt + sqrt(1/N) dB_j,

the gradient flow of ``Phi = (gamma/2) sum lam^2 - (1/(2N)) sum_{j != k} log|lam_j - lam_k|``
plus independent noise.  Arrays may carry leading batch axes; the particle
index is always the last axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import gaussian_kde

from .oracles import SemicircleLaw

__all__ = [
    "CollisionError",
    "ParticleState",
    "DiagnosticsRecord",
    "drift",
    "drift_array",
    "potential",
    "free_energy",
    "step_deterministic",
    "step_stochastic",
    "diagnostics",
    "w1_to_semicircle",
    "w2_to_semicircle",
    "w2_empirical",
    "kde_entropy",
    "simulate",
]

COLLISION_GAP = 1e-14
MAX_HALVINGS = 60
NOISY_RTOL = 0.25


class CollisionError(RuntimeError):
    def __init__(self, message: str, pair: tuple[int, int] | None = None):
        super().__init__(message)
        self.pair = pair


@dataclass(frozen=True, eq=False)
class ParticleState:
    positions: np.ndarray
    gamma: float = 0.0
    t: float = 0.0
    # suggested internal step carried between calls
    h: float | None = field(default=None, compare=False)

    def __post_init__(self):
        lam = np.array(self.positions, dtype=float)
        if lam.shape[-1] < 1:
            raise ValueError("need at least one particle")
        if not np.all(np.isfinite(lam)):
            raise ValueError("positions must be finite")
        if lam.shape[-1] > 1 and np.any(np.diff(lam, axis=-1) <= 0):
            raise ValueError("positions must be strictly increasing")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        lam.setflags(write=False)
        object.__setattr__(self, "positions", lam)

    @property
    def N(self) -> int:
        return self.positions.shape[-1]


def _pair_diff(lam: np.ndarray) -> np.ndarray:
    return lam[..., :, None] - lam[..., None, :]


def drift_array(lam: np.ndarray, gamma: float) -> np.ndarray:
    """Drift for an array of configurations (particle index last)."""
    n = lam.shape[-1]
    if n > 1 and np.min(np.diff(np.sort(lam, axis=-1), axis=-1)) < COLLISION_GAP:
        raise CollisionError("particles collided (gap below 1e-14)")
    d = _pair_diff(lam)
    idx = np.arange(n)
    d[..., idx, idx] = np.inf
    np.reciprocal(d, out=d)
    # fixed ascending-k summation per j
    return d.sum(axis=-1) / n - gamma * lam


def drift(state: ParticleState) -> np.ndarray:
    return drift_array(state.positions, state.gamma)


def _log_gap_sum(lam: np.ndarray) -> np.ndarray:
    """``sum_{j<k} log|lam_j - lam_k|``."""
    n = lam.shape[-1]
    d = np.abs(_pair_diff(lam))
    idx = np.arange(n)
    d[..., idx, idx] = 1.0
    return 0.5 * np.log(d).sum(axis=(-2, -1))


def potential(lam: np.ndarray, gamma: float) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    return 0.5 * gamma * (lam * lam).sum(axis=-1) - _log_gap_sum(lam) / n


def free_energy(lam: np.ndarray, gamma: float) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    return gamma / (2 * n) * (lam * lam).sum(axis=-1) - _log_gap_sum(lam) / n ** 2


def _ordered(lam: np.ndarray, floor: float) -> bool:
    if lam.shape[-1] < 2:
        return True
    return bool(np.min(np.diff(lam, axis=-1)) > floor)


def _bridge(H, dW, h, noise, rng):
    """Brownian-bridge value at ``h`` of a path with increment ``dW`` over ``H``."""
    if not noise:
        return dW
    frac = h / H
    z = rng.standard_normal(np.shape(dW))
    return frac * dW + math.sqrt(h * (H - h) / H) * z


def _advance(lam, gamma, dt, dW, noise, tol, h0, rng):
    """Advance ``lam`` by ``dt`` using Heun sub-steps with additive noise.

    ``dW`` is the Brownian increment over ``dt``.  Sub-intervals are split by
    Brownian bridges, so a rejected step never discards noise that was already
    drawn.  With ``noise == 0`` this is exactly the deterministic integrator.
    """
    n = lam.shape[-1]
    width = float(np.max(lam) - np.min(lam)) if n > 1 else 1.0
    floor = 1e-10 * max(width, 1e-300)
    # error and potential control only make sense without noise; noisy
    # steps are split only to keep the ordering
    controlled = noise == 0.0
    check_phi = controlled and n > 1
    phi_old = potential(lam, gamma) if check_phi else None
    h_target = dt if h0 is None else min(h0, dt)
    h_used = h_target
    stack = [(dt, dW)]
    halvings = 0
    pred = lam
    while stack:
        H, dw = stack.pop()
        if H > h_target * (1.0 + 1e-12):
            dw1 = _bridge(H, dw, h_target, noise, rng)
            stack.append((H - h_target, dw - dw1))
            stack.append((h_target, dw1))
            continue
        k1 = drift_array(lam, gamma)
        kick = noise * dw / math.sqrt(n) if noise else 0.0
        pred = lam + H * k1 + kick
        ok = _ordered(pred, floor)
        err = math.inf
        if ok:
            try:
                k2 = drift_array(pred, gamma)
            except CollisionError:
                ok = False
        if ok:
            new = lam + 0.5 * H * (k1 + k2) + kick
            diff = 0.5 * H * np.abs(k2 - k1)
            err = float(np.max(diff))
            if controlled:
                ok = _ordered(new, floor) and err <= tol
            else:
                # stability: the corrector may only move a particle by a small
                # fraction of its own step
                scale = np.abs(H * k1) + np.abs(kick)
                ok = _ordered(new, floor) and bool(np.all(diff <= tol + NOISY_RTOL * scale))
            if ok and check_phi:
                phi_new = potential(new, gamma)
                ok = bool(np.all(phi_new <= phi_old + 1e-12))
        if ok:
            lam = new
            if check_phi:
                phi_old = phi_new
            h_used = H
            halvings = 0
            if not controlled or err == 0.0:
                grow = 2.0
            else:
                grow = min(2.0, max(1.0, 0.9 * math.sqrt(tol / err)))
            h_target = min(dt, H * grow)
            continue
        halvings += 1
        if halvings > MAX_HALVINGS:
            j = 0
            if n > 1:
                gaps = np.diff(pred, axis=-1).reshape(-1, n - 1).min(axis=0)
                j = int(np.argmin(gaps))
            raise CollisionError(
                f"step size underflow after {MAX_HALVINGS} halvings; blocking pair ({j}, {j + 1})",
                (j, j + 1))
        h_target = 0.5 * H
        stack.append((H, dw))
    return lam, h_used


def step_deterministic(state: ParticleState, dt: float, *, tol: float = 1e-5) -> ParticleState:
    """Advance by ``dt`` with adaptive Heun sub-steps.

    A sub-step is rejected (and halved) if it would close a gap below
    ``1e-10`` times the configuration width, if the local error estimate
    exceeds ``tol``, or if the potential would increase.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    rng = np.random.default_rng(0)
    lam, h = _advance(state.positions, state.gamma, dt, 0.0, 0.0, tol, state.h, rng)
    return ParticleState(lam, state.gamma, state.t + dt, h)


def step_stochastic(state: ParticleState, dt: float, rng_seed, *, noise_scale: float = 1.0,
                    tol: float = 1e-5) -> ParticleState:
    """Advance by ``dt`` with noise ``noise_scale * sqrt(dt / N)`` per particle.

    ``rng_seed`` is an integer seed or a ``numpy.random.Generator``.  Each call
    draws one Gaussian increment per particle for the whole step; rejected
    sub-steps refine it by Brownian bridges.  ``noise_scale = 0`` gives exactly
    :func:`step_deterministic`.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    dW = math.sqrt(dt) * rng.standard_normal(state.positions.shape)
    lam, h = _advance(state.positions, state.gamma, dt, dW, float(noise_scale), tol, state.h, rng)
    return ParticleState(lam, state.gamma, state.t + dt, h)


# ---------------------------------------------------------------------------
# distances and diagnostics


def w1_to_semicircle(positions, radius: float) -> float:
    """Exact W1 between the empirical measure and the semicircle law.

    Uses ``W1 = int |F_N - F|``, integrating piecewise between sorted atoms
    with the closed-form antiderivative of the semicircle CDF.
    """
    law = SemicircleLaw(radius)
    lam = np.sort(np.asarray(positions, dtype=float))
    n = lam.size
    lo = min(lam[0], -radius)
    hi = max(lam[-1], radius)
    edges = np.concatenate([[lo], lam, [hi]])
    levels = np.arange(n + 1) / n
    p, q = edges[:-1], edges[1:]
    xc = np.clip(law.quantile(levels), p, q)
    G = law.cdf_antiderivative
    left = levels * (xc - p) - (G(xc) - G(p))
    right = (G(q) - G(xc)) - levels * (q - xc)
    return float(np.sum(left + right))


def w2_to_semicircle(positions, radius: float) -> float:
    law = SemicircleLaw(radius)
    lam = np.sort(np.asarray(positions, dtype=float))
    n = lam.size
    qs = law.quantile(np.arange(n + 1) / n)
    m1 = np.diff(law.partial_moment(qs, 1))
    m2 = np.diff(law.partial_moment(qs, 2))
    val = np.sum(lam * lam / n - 2.0 * lam * m1 + m2)
    return float(math.sqrt(max(val, 0.0)))


def w2_empirical(a, b) -> float:
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise ValueError("equal particle counts required")
    return float(math.sqrt(np.mean((a - b) ** 2)))


def kde_entropy(positions, n_grid: int = 512) -> float:
    """``int rho log rho`` of a Gaussian KDE with bandwidth ``N^{-1/5} std``.

    A surrogate diagnostic only.
    """
    lam = np.asarray(positions, dtype=float)
    n = lam.size
    kde = gaussian_kde(lam, bw_method=n ** (-0.2))
    bw = n ** (-0.2) * lam.std(ddof=1)
    x = np.linspace(lam.min() - 6 * bw, lam.max() + 6 * bw, n_grid)
    rho = kde(x)
    integrand = np.where(rho > 0, rho * np.log(np.where(rho > 0, rho, 1.0)), 0.0)
    return float(trapezoid(integrand, x))


@dataclass
class DiagnosticsRecord:
    t: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    m2: list = field(default_factory=list)
    E_free: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    Phi: list = field(default_factory=list)
    w1: list = field(default_factory=list)

    def append(self, entry: dict) -> None:
        for k, v in entry.items():
            getattr(self, k).append(v)

    def as_arrays(self) -> dict[str, np.ndarray]:
        return {k: np.asarray(getattr(self, k)) for k in
                ("t", "mass", "m2", "E_free", "theta", "Phi", "w1")}


def diagnostics(state: ParticleState, target_radius: float | None = None, *,
                entropy: bool = True) -> dict:
    """One diagnostics entry; the target radius defaults to ``sqrt(2/gamma)``."""
    lam = state.positions
    if lam.ndim != 1 or lam.size < 2:
        raise ValueError("diagnostics need a single configuration with N >= 2")
    g = state.gamma
    if target_radius is None:
        target_radius = math.sqrt(2.0 / g) if g > 0 else 2.0 * math.sqrt(max(state.t, 1e-300))
    return {
        "t": state.t,
        "mass": 1.0,
        "m2": float(np.mean(lam * lam)),
        "E_free": float(free_energy(lam, g)),
        "theta": kde_entropy(lam) if entropy else float("nan"),
        "Phi": float(potential(lam, g)),
        "w1": w1_to_semicircle(lam, target_radius),
    }


def simulate(state: ParticleState, t_end: float, dt_out: float, *, seed=None,
             noise_scale: float = 0.0, tol: float = 1e-5, target_radius: float | None = None,
             entropy: bool = False) -> tuple[list[ParticleState], DiagnosticsRecord]:
    """Run to ``t_end`` with snapshots and diagnostics every ``dt_out``."""
    if not dt_out > 0:
        raise ValueError("dt_out must be positive")
    rng = np.random.default_rng(seed)
    states = [state]
    rec = DiagnosticsRecord()
    rec.append(diagnostics(state, target_radius, entropy=entropy))
    n_out = int(round((t_end - state.t) / dt_out))
    for _ in range(n_out):
        if noise_scale == 0.0:
            state = step_deterministic(state, dt_out, tol=tol)
        else:
            state = step_stochastic(state, dt_out, rng, noise_scale=noise_scale, tol=tol)
        states.append(state)
        rec.append(diagnostics(state, target_radius, entropy=entropy))
    return states, rec


def with_time(state: ParticleState, t: float) -> ParticleState:
    return replace(state, t=t)
