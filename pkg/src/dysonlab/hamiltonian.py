"""Bi-Hamiltonian operators of the coupled Burgers, gas and p-system forms.

Three coordinate systems on a periodic grid:

* ``u``:   (rho, u) with operators ``J``, ``K``
* ``m``:   (rho, m = rho u) with operators ``Jt``, ``Kt``
* ``eta``: (eta = 1/tau, V) in Lagrangian mass coordinates, operators ``P1``, ``P2``

Operator entries written as ``A d B`` act as ``v -> A * D(B * v)``; so
``-d rho`` is ``v -> -D(rho v)`` and ``-rho d`` is ``v -> -rho D(v)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PeriodicField",
    "VariationalDerivative",
    "TARGETS",
    "OPERATORS",
    "derivative",
    "functional",
    "var_derivative",
    "apply_operator",
    "system_rhs",
    "random_smooth_state",
    "antisymmetry_defect",
    "bihamiltonian_defect",
    "chain_rule_defect",
    "p1_reading_defects",
    "hamiltonian_drift",
    "verification_report",
]

TARGETS = ("H1_u", "H2_u", "H1_m", "H2_m", "H1_eta", "H2_eta")
OPERATORS = ("J", "K", "Jt", "Kt", "P1", "P2")
_COORDS = {"J": "u", "K": "u", "Jt": "m", "Kt": "m", "P1": "eta", "P2": "eta"}
_PAIR = {"u": ("J", "K"), "m": ("Jt", "Kt"), "eta": ("P1", "P2")}


@dataclass(frozen=True, eq=False)
class PeriodicField:
    """Samples ``values[j] = f(j L / n)`` of an ``L``-periodic function."""

    values: np.ndarray
    period: float = 1.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 4:
            raise ValueError("need a 1-D array with at least 4 samples")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        if not self.period > 0:
            raise ValueError("period must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        return self.period / self.n

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    def inner(self, other: "PeriodicField") -> float:
        _check_grid(self, other)
        return float(np.dot(self.values, other.values) * self.dx)


@dataclass(frozen=True, eq=False)
class VariationalDerivative:
    target: str
    names: tuple[str, str]
    components: tuple[PeriodicField, PeriodicField]

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i):
        return self.components[i]


def _check_grid(a: PeriodicField, b: PeriodicField) -> None:
    if a.n != b.n or a.period != b.period:
        raise ValueError("grid mismatch between periodic fields")


def derivative(v: np.ndarray, period: float, method: str = "spectral") -> np.ndarray:
    """Periodic derivative: FFT with the Nyquist mode zeroed, or 4th-order centred."""
    v = np.asarray(v, dtype=float)
    n = v.size
    if method == "spectral":
        k = np.fft.rfftfreq(n, d=period / n) * 2.0 * np.pi
        if n % 2 == 0:
            k[-1] = 0.0
        return np.fft.irfft(1j * k * np.fft.rfft(v), n)
    if method == "fd4":
        h = period / n
        return (8.0 * (np.roll(v, -1) - np.roll(v, 1)) - (np.roll(v, -2) - np.roll(v, 2))) / (12.0 * h)
    raise ValueError(f"unknown derivative method {method!r}")


def _coords_of(target: str) -> str:
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}")
    return target.split("_")[1]


def _names(coords: str) -> tuple[str, str]:
    return {"u": ("rho", "u"), "m": ("rho", "m"), "eta": ("eta", "V")}[coords]


def _arrays(fields) -> tuple[np.ndarray, np.ndarray, float]:
    a, b = fields
    if isinstance(a, PeriodicField):
        _check_grid(a, b)
        return a.values, b.values, a.period
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("grid mismatch between fields")
    return a, b, 1.0


def _density(target: str, a, b, alpha):
    if target == "H1_u":
        return b ** 3 / 6.0 + 0.5 * alpha * a * a * b
    if target == "H2_u":
        return 0.5 * a * b * b + alpha * a ** 3 / 6.0
    if target == "H1_m":
        return b ** 3 / (6.0 * a ** 3) + 0.5 * alpha * a * b
    if target == "H2_m":
        return b * b / (2.0 * a) + alpha * a ** 3 / 6.0
    if target == "H1_eta":
        return b ** 3 / (6.0 * a) + 0.5 * alpha * a * b
    return 0.5 * b * b + alpha * a * a / 6.0


def functional(target: str, fields, alpha: float) -> float:
    """Value of the Hamiltonian ``target`` (periodic rectangle rule)."""
    _coords_of(target)
    a, b, period = _arrays(fields)
    return float(np.sum(_density(target, a, b, alpha)) * period / a.size)


def var_derivative(target: str, fields, alpha: float) -> VariationalDerivative:
    """Closed-form functional derivatives of the six Hamiltonians."""
    coords = _coords_of(target)
    a, b, period = _arrays(fields)
    if target == "H1_u":
        d = (alpha * a * b, 0.5 * b * b + 0.5 * alpha * a * a)
    elif target == "H2_u":
        d = (0.5 * b * b + 0.5 * alpha * a * a, a * b)
    elif target == "H1_m":
        u = b / a
        d = (-u ** 3 / (2.0 * a) + 0.5 * alpha * b, u * u / (2.0 * a) + 0.5 * alpha * a)
    elif target == "H2_m":
        u = b / a
        d = (-0.5 * u * u + 0.5 * alpha * a * a, u)
    elif target == "H1_eta":
        d = (-b ** 3 / (6.0 * a * a) + 0.5 * alpha * b, b * b / (2.0 * a) + 0.5 * alpha * a)
    else:
        d = (alpha * a / 3.0, b)
    return VariationalDerivative(target, _names(coords),
                                 (PeriodicField(d[0], period), PeriodicField(d[1], period)))


def apply_operator(op: str, vec, state, alpha: float, *, method: str = "spectral",
                   p1_eta_coeff: float | None = None):
    """Apply one of ``J, K, Jt, Kt, P1, P2`` to ``vec`` at ``state``.

    ``vec`` and ``state`` are pairs of :class:`PeriodicField` (or arrays on
    the unit period).  Returns a pair of :class:`PeriodicField`.

    ``p1_eta_coeff`` overrides the coefficient of the ``eta d eta`` term in
    the lower-right entry of ``P1`` (default ``-1``, the value for which
    ``P1 dH1 = P2 dH2``); it exists to test alternative readings.
    """
    if op not in OPERATORS:
        raise ValueError(f"unknown operator {op!r}")
    v1, v2, period = _arrays(vec)
    a, b, period_s = _arrays(state)
    if a.size != v1.size or period != period_s:
        raise ValueError("grid mismatch between vector and state")

    def D(f):
        return derivative(f, period, method)

    if op == "J":
        r = (-D(v1) / alpha, -D(v2))
    elif op == "K":
        r = (-D(v2), -D(v1))
    elif op == "Jt":
        rho, u = a, b / a
        r = (-(D(v1) + D(u * v2)) / alpha,
             -(u * D(v1) + u * D(u * v2)) / alpha - rho * D(rho * v2))
    elif op == "Kt":
        rho, u = a, b / a
        r = (-D(rho * v2), -rho * D(v1) - u * D(rho * v2) - rho * D(u * v2))
    elif op == "P1":
        eta, V = a, b
        c = 1.0 / alpha
        ce = -1.0 if p1_eta_coeff is None else p1_eta_coeff
        r = (-0.75 * c * eta * D(eta * v1)
             - 0.25 * c * eta * D(V * v2) + 1.5 * c * V * D(eta * v2) - c * D(eta * V * v2),
             -0.25 * c * V * D(eta * v1) + 1.5 * c * eta * D(V * v1) - c * eta * V * D(v1)
             + 0.25 * c * V * D(V * v2) + ce * eta * D(eta * v2))
    else:
        eta = a
        r = (-eta * eta * D(v2), -D(eta * eta * v1))
    return PeriodicField(r[0], period), PeriodicField(r[1], period)


def system_rhs(coords: str, state, alpha: float, *, method: str = "spectral"):
    """Right-hand side discretised directly from the conservation laws."""
    a, b, period = _arrays(state)

    def D(f):
        return derivative(f, period, method)

    if coords == "u":
        r = (-D(a * b), -D(0.5 * b * b + 0.5 * alpha * a * a))
    elif coords == "m":
        r = (-D(b), -D(b * b / a + alpha * a ** 3 / 3.0))
    elif coords == "eta":
        r = (-a * a * D(b), -alpha * a * a * D(a))
    else:
        raise ValueError(f"unknown coordinates {coords!r}")
    return PeriodicField(r[0], period), PeriodicField(r[1], period)


def random_smooth_state(n: int, coords: str, rng, *, period: float = 1.0, modes: int = 8):
    """Truncated Fourier series with amplitudes ``2^-k``; the first field has min >= 0.5."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    x = np.arange(n) * period / n

    def series():
        out = np.zeros(n)
        for k in range(1, modes + 1):
            ph = rng.uniform(0, 2 * np.pi)
            out += 2.0 ** (-k) * rng.standard_normal() * np.cos(2 * np.pi * k * x / period + ph)
        return out

    first = series()
    first += 0.5 - first.min() + rng.uniform(0.0, 0.5)
    second = series()
    if coords == "m":
        second = first * second
    elif coords not in ("u", "eta"):
        raise ValueError(f"unknown coordinates {coords!r}")
    return PeriodicField(first, period), PeriodicField(second, period)


def _random_vector(n: int, rng, period: float):
    return random_smooth_state(n, "u", rng, period=period)


def antisymmetry_defect(op: str, state, alpha: float = 1.0, trials: int = 10, *, seed=0,
                        method: str = "spectral") -> float:
    """``max |<A v, w> + <v, A w>|`` over random smooth pairs ``(v, w)``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    _, _, period = _arrays(state)
    n = state[0].n if isinstance(state[0], PeriodicField) else len(state[0])
    worst = 0.0
    for _ in range(trials):
        v = _random_vector(n, rng, period)
        w = _random_vector(n, rng, period)
        Av = apply_operator(op, v, state, alpha, method=method)
        Aw = apply_operator(op, w, state, alpha, method=method)
        val = sum(Av[i].inner(w[i]) + v[i].inner(Aw[i]) for i in range(2))
        worst = max(worst, abs(val))
    return worst


def bihamiltonian_defect(coords: str, state, alpha: float, *, method: str = "spectral") -> dict:
    """Max pointwise gaps between ``A1 dH1``, ``A2 dH2`` and the direct right-hand side."""
    op1, op2 = _PAIR[coords]
    r1 = apply_operator(op1, var_derivative(f"H1_{coords}", state, alpha), state, alpha, method=method)
    r2 = apply_operator(op2, var_derivative(f"H2_{coords}", state, alpha), state, alpha, method=method)
    rhs = system_rhs(coords, state, alpha, method=method)

    def gap(p, q):
        return max(float(np.max(np.abs(p[i].values - q[i].values))) for i in range(2))

    return {"identity": gap(r1, r2), "first_vs_rhs": gap(r1, rhs), "second_vs_rhs": gap(r2, rhs)}


def p1_reading_defects(state, alpha: float, *, method: str = "spectral") -> dict[str, float]:
    """Identity defect of ``P1 dH1 = P2 dH2`` for candidate ``eta d eta`` coefficients."""
    target = apply_operator("P2", var_derivative("H2_eta", state, alpha), state, alpha, method=method)
    dh1 = var_derivative("H1_eta", state, alpha)
    out = {}
    for label, coeff in (("-1", -1.0), ("+1/alpha", 1.0 / alpha), ("-1/alpha", -1.0 / alpha)):
        r = apply_operator("P1", dh1, state, alpha, method=method, p1_eta_coeff=coeff)
        out[label] = max(float(np.max(np.abs(r[i].values - target[i].values))) for i in range(2))
    return out


def chain_rule_defect(state_rho_u, alpha: float) -> float:
    """Pointwise check of ``dH^u = [[1, u], [0, rho]] dH^m`` for both Hamiltonians."""
    rho, u, period = _arrays(state_rho_u)
    m = rho * u
    worst = 0.0
    for j in (1, 2):
        du = var_derivative(f"H{j}_u", (PeriodicField(rho, period), PeriodicField(u, period)), alpha)
        dm = var_derivative(f"H{j}_m", (PeriodicField(rho, period), PeriodicField(m, period)), alpha)
        e1 = du[0].values - (dm[0].values + u * dm[1].values)
        e2 = du[1].values - rho * dm[1].values
        worst = max(worst, float(np.max(np.abs(e1))), float(np.max(np.abs(e2))))
    return worst


def hamiltonian_drift(traj) -> tuple[float, float]:
    """Max relative drift of ``H1^u`` and ``H2^u`` along a coupled-Burgers trajectory."""
    from .coupled_burgers import hamiltonians

    h1 = np.array([hamiltonians(traj.state(i))["H1"] for i in range(len(traj))])
    h2 = np.array([hamiltonians(traj.state(i))["H2"] for i in range(len(traj))])

    def rel(h):
        scale = max(abs(h[0]), 1e-300)
        return float(np.max(np.abs(h - h[0])) / scale) if h[0] != 0 else float(np.max(np.abs(h)))

    return rel(h1), rel(h2)


def verification_report(n: int = 256, trials: int = 50, alpha: float = 1.0, seed: int = 0,
                        method: str = "spectral") -> list[dict]:
    """Identity and antisymmetry defects over random smooth states."""
    rng = np.random.default_rng(seed)
    out = []
    for coords, (op1, op2) in _PAIR.items():
        worst_id = worst_rhs = 0.0
        worst_skew = {op1: 0.0, op2: 0.0}
        for k in range(trials):
            st = random_smooth_state(n, coords, rng)
            d = bihamiltonian_defect(coords, st, alpha, method=method)
            worst_id = max(worst_id, d["identity"])
            worst_rhs = max(worst_rhs, d["first_vs_rhs"], d["second_vs_rhs"])
            for op in (op1, op2):
                worst_skew[op] = max(worst_skew[op],
                                     antisymmetry_defect(op, st, alpha, 1, seed=seed + k, method=method))
        grid = {"n": n, "period": 1.0, "method": method}
        out.append({"operator": f"{op1}/{op2}", "identity": f"{op1} dH1_{coords} = {op2} dH2_{coords}",
                    "max_defect": worst_id, "grid": grid, "seed": seed})
        out.append({"operator": f"{op1}/{op2}", "identity": "rhs", "max_defect": worst_rhs,
                    "grid": grid, "seed": seed})
        for op in (op1, op2):
            out.append({"operator": op, "identity": "antisymmetry", "max_defect": worst_skew[op],
                        "grid": grid, "seed": seed})
    return out


def report_json(report: list[dict]) -> str:
    return json.dumps(report, indent=2)
