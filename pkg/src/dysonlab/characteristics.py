"""Complex characteristics for ``f_t + f f_z = gamma^2 z`` on the upper half plane.

``f0`` is the Stieltjes transform ``int rho0(s) / (z - s) ds`` of the initial
density, so its boundary value is ``pi H rho0 - i pi rho0``.  The forward map is

    Z(w, t) = w cosh(gamma t) + g0(w) sinh(gamma t) / gamma,   g0 = f0 - gamma w,
            = a w + s f0(w),   a = exp(-gamma t),  s = sinh(gamma t) / gamma,

and ``f(Z(w, t), t) = f0(w) exp(gamma t)``.  Writing ``w = a_x + i b_x`` for the
preimage of a real point ``x``, the solution of the Dyson equation is
``rho(x, t) = P rho0(a_x, b_x) exp(gamma t)`` and ``u = Re f(x, t)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import wofz

from .analysis import (
    FieldKind,
    Grid,
    GridField,
    UpperHalfPoint,
    dstieltjes_of_field,
    hilbert_transform,
    pv_derivative_of_hilbert,
    stieltjes_of_field,
)
from .oracles import SemicircleLaw, _dstieltjes_semicircle

__all__ = [
    "CharacteristicsError",
    "Cauchy",
    "Semicircle",
    "QuadraticGaussian",
    "GridDensity",
    "InitialData",
    "CharacteristicSolve",
    "forward_characteristic",
    "backward_characteristic",
    "trace_density",
    "trace_gradient",
    "trace",
    "BlowupReport",
    "blowup_estimate",
    "steepening_time",
]

_SQRT_PI = math.sqrt(math.pi)


class CharacteristicsError(RuntimeError):
    """Newton / bracketing failure, with the last residual attached."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


# ---------------------------------------------------------------------------
# initial densities with a known Stieltjes transform


@dataclass(frozen=True)
class Cauchy:
    eps: float = 1.0
    name = "cauchy_closed_form"
    positive = True

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return self.eps / (np.pi * (x * x + self.eps ** 2))

    def stieltjes(self, w):
        return 1.0 / (np.asarray(w, dtype=complex) + 1j * self.eps)

    def dstieltjes(self, w):
        return -1.0 / (np.asarray(w, dtype=complex) + 1j * self.eps) ** 2

    @property
    def sup(self) -> float:
        return 1.0 / (np.pi * self.eps)


@dataclass(frozen=True)
class Semicircle:
    radius: float = 2.0
    name = "semicircle_closed_form"
    positive = False

    def density(self, x):
        return SemicircleLaw(self.radius).density(x)

    def _arg(self, w):
        # Real arguments carry a +0 imaginary part, so the principal square
        # roots below give the limit from the upper half plane on the cut.
        return 2.0 * np.asarray(w, dtype=complex) / self.radius

    def stieltjes(self, w):
        z = self._arg(w)
        # 2 / (z + root) avoids cancellation for large |z|.
        return (2.0 / self.radius) * 2.0 / (z + np.sqrt(z - 2.0) * np.sqrt(z + 2.0))

    def dstieltjes(self, w):
        return (2.0 / self.radius) ** 2 * _dstieltjes_semicircle(self._arg(w))

    @property
    def sup(self) -> float:
        return 2.0 / (np.pi * self.radius)


@dataclass(frozen=True)
class QuadraticGaussian:
    """Unit-mass ``(2 / sqrt(pi)) x^2 exp(-x^2)``; vanishes at the origin."""

    name = "quadratic_gaussian_closed_form"
    positive = False
    c = 2.0 / _SQRT_PI

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return self.c * x * x * np.exp(-x * x)

    # beyond this radius the closed form cancels badly; use the moment series
    far = 8.0
    # even moments (2k+1)!! / 2^k of the unit-mass density
    moments = np.cumprod(np.concatenate([[1.0], (2 * np.arange(1, 31) + 1) / 2.0]))

    def _series(self, w, deriv):
        inv2 = 1.0 / (w * w)
        k = np.arange(self.moments.size)
        coef = self.moments * (-(2 * k + 1) if deriv else 1.0)
        acc = np.zeros_like(w)
        for c in coef[::-1]:
            acc = acc * inv2 + c
        return acc / (w * w) if deriv else acc / w

    def _split(self, w, closed, deriv):
        w = np.asarray(w, dtype=complex)
        far = np.abs(w) > self.far
        out = np.empty_like(w)
        out[~far] = closed(w[~far])
        out[far] = self._series(w[far], deriv)
        return out if out.ndim else out[()]

    def stieltjes(self, w):
        # int s^2 e^{-s^2} / (w - s) ds = -i pi w^2 W(w) - sqrt(pi) w, W = Faddeeva.
        def closed(w):
            return self.c * (-1j * np.pi * w * w * wofz(w) - _SQRT_PI * w)
        return self._split(w, closed, False)

    def dstieltjes(self, w):
        def closed(w):
            fw = wofz(w)
            dfw = -2.0 * w * fw + 2j / _SQRT_PI
            return self.c * (-1j * np.pi * (2.0 * w * fw + w * w * dfw) - _SQRT_PI)
        return self._split(w, closed, True)

    @property
    def sup(self) -> float:
        return self.c / math.e


@dataclass(frozen=True, eq=False)
class GridDensity:
    rho: GridField
    name = "grid_poisson"

    def density(self, x):
        return np.interp(x, self.rho.x, self.rho.values, left=0.0, right=0.0)

    def stieltjes(self, w):
        return stieltjes_of_field(self.rho, w)

    def dstieltjes(self, w):
        return dstieltjes_of_field(self.rho, w)

    @property
    def positive(self) -> bool:
        return bool(np.min(self.rho.values) > 0.0)

    @property
    def sup(self) -> float:
        return float(np.max(self.rho.values))


@dataclass(frozen=True, eq=False)
class InitialData:
    """Initial density as a nonnegative combination of components.

    ``f0_kind`` names the evaluation route; ``rho0`` is a grid sample (the
    data itself for ``grid_poisson``).
    """

    parts: tuple
    sample_grid: Grid = field(default_factory=lambda: Grid(-8.0, 8.0, 2048))

    def __post_init__(self):
        if not self.parts:
            raise ValueError("initial data needs at least one component")
        for wgt, _ in self.parts:
            if not wgt > 0:
                raise ValueError("component weights must be positive")

    @classmethod
    def cauchy(cls, eps: float = 1.0) -> "InitialData":
        return cls(((1.0, Cauchy(eps)),))

    @classmethod
    def semicircle(cls, radius: float = 2.0) -> "InitialData":
        return cls(((1.0, Semicircle(radius)),))

    @classmethod
    def quadratic_gaussian(cls) -> "InitialData":
        return cls(((1.0, QuadraticGaussian()),))

    @classmethod
    def from_grid(cls, rho0: GridField) -> "InitialData":
        if rho0.kind is not FieldKind.DENSITY:
            rho0 = rho0.with_values(rho0.values, FieldKind.DENSITY)
        return cls(((1.0, GridDensity(rho0)),), sample_grid=rho0.grid)

    def blend(self, other: "InitialData", weight: float) -> "InitialData":
        """``(1 - weight) * self + weight * other``."""
        if not 0 < weight < 1:
            raise ValueError("weight must lie in (0, 1)")
        parts = tuple((w * (1 - weight), c) for w, c in self.parts)
        parts += tuple((w * weight, c) for w, c in other.parts)
        return InitialData(parts, self.sample_grid)

    @property
    def f0_kind(self) -> str:
        names = sorted({c.name for _, c in self.parts})
        return "+".join(names)

    @property
    def strictly_positive(self) -> bool:
        return any(c.positive for _, c in self.parts)

    @property
    def mass(self) -> float:
        total = 0.0
        for w, c in self.parts:
            total += w * (c.rho.integral() if isinstance(c, GridDensity) else 1.0)
        return total

    @property
    def sup(self) -> float:
        return sum(w * c.sup for w, c in self.parts)

    @property
    def rho0(self) -> GridField:
        if len(self.parts) == 1 and isinstance(self.parts[0][1], GridDensity):
            return self.parts[0][1].rho
        return GridField(self.sample_grid, self.density(self.sample_grid.centers), FieldKind.DENSITY)

    def density(self, x):
        return sum(w * c.density(x) for w, c in self.parts)

    def f0(self, w):
        return sum(wt * c.stieltjes(w) for wt, c in self.parts)

    def df0(self, w):
        return sum(wt * c.dstieltjes(w) for wt, c in self.parts)


@dataclass(frozen=True)
class CharacteristicSolve:
    gamma: float = 0.0
    t: float = 0.0
    newton_tol: float = 1e-12
    newton_max_iter: int = 50

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.t < 0:
            raise ValueError("t must be nonnegative")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be >= 1")

    @property
    def a(self) -> float:
        return math.exp(-self.gamma * self.t)

    @property
    def s(self) -> float:
        g, t = self.gamma, self.t
        if g == 0.0:
            return t
        return math.sinh(g * t) / g

    @property
    def growth(self) -> float:
        return math.exp(self.gamma * self.t)


def _as_complex(w) -> complex:
    if isinstance(w, UpperHalfPoint):
        return w.z
    return complex(w)


def forward_characteristic(w, cfg: CharacteristicSolve, data: InitialData) -> complex:
    """``Z(w, t)`` for a point ``w`` with ``Im w > 0``."""
    w = _as_complex(w)
    if not w.imag > 0:
        raise ValueError("forward characteristic needs Im w > 0")
    return complex(cfg.a * w + cfg.s * data.f0(w))


def _mass_start(z: complex, cfg: CharacteristicSolve, mass: float) -> complex:
    # Exact preimage for a point mass: a w^2 - z w + s M = 0, upper root.
    a, s = cfg.a, cfg.s
    disc = np.sqrt(complex(z * z - 4.0 * a * s * mass))
    roots = [(z + disc) / (2 * a), (z - disc) / (2 * a)]
    w = max(roots, key=lambda r: (r.imag, abs(r)))
    floor = max(1e-3, 1e-2 * abs(w))
    if w.imag < floor:
        w = complex(w.real, floor)
    return w


def _newton(z: complex, w: complex, cfg: CharacteristicSolve, data: InitialData):
    a, s = cfg.a, cfg.s
    res = float("inf")
    for _ in range(cfg.newton_max_iter + 1):
        r = a * w + s * complex(data.f0(w)) - z
        tol = cfg.newton_tol * max(1.0, abs(z), a * abs(w))
        res = abs(r)
        if res <= tol:
            return w, res
        jac = a + s * complex(data.df0(w))
        det = jac.real ** 2 + jac.imag ** 2
        if det < 1e-14 * a * a:
            raise CharacteristicsError(
                f"Jacobian determinant {det:.3e} below threshold at w={w}", res)
        w_new = w - r / jac
        if w_new.imag <= 0.0:
            w_new = complex(w_new.real, 0.5 * w.imag)
        w = w_new
    raise CharacteristicsError(
        f"Newton did not converge for z={z} (residual {res:.3e})", res)


def _bracketed(z: complex, cfg: CharacteristicSolve, data: InitialData) -> complex:
    """Two-step bisection solve: y(x) from the imaginary part, then x from the real part."""
    a, s = cfg.a, cfg.s
    z1, z2 = z.real, z.imag
    mass = data.mass

    def ypart(x):
        def h(y):
            return a * y + s * float(data.f0(complex(x, y)).imag) - z2

        lo = max(z2 / a, 1e-14)
        hi = (z2 + math.sqrt(z2 * z2 + 4 * a * s * mass)) / (2 * a) + 1e-12
        if h(lo) >= 0:
            return lo
        while h(hi) < 0:
            hi *= 2.0
        return brentq(h, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=400)

    def q(x):
        return a * x + s * float(data.f0(complex(x, ypart(x))).real) - z1

    span = 1.0 + abs(z1) / a + s * mass
    lo, hi = z1 / a - span, z1 / a + span
    k = 0
    while q(lo) > 0 and k < 60:
        lo -= span * 2 ** k
        k += 1
    k = 0
    while q(hi) < 0 and k < 60:
        hi += span * 2 ** k
        k += 1
    x = brentq(q, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=400)
    return complex(x, ypart(x))


def backward_characteristic(z, cfg: CharacteristicSolve, data: InitialData,
                            w0: complex | None = None) -> complex:
    """Preimage ``w`` (``Im w > 0``) of ``z`` under the forward map at time ``cfg.t``."""
    z = _as_complex(z)
    if z.imag < 0:
        raise ValueError("z must lie in the closed upper half plane")
    if cfg.t == 0.0:
        if not z.imag > 0:
            raise ValueError("t = 0 requires Im z > 0")
        return z
    starts = []
    if w0 is not None:
        starts.append(complex(w0))
    starts.append(_mass_start(z, cfg, data.mass))
    starts.append(complex(z.real, max(1.0, math.sqrt(cfg.t))))
    last = None
    for w_init in starts:
        try:
            w, _ = _newton(z, w_init, cfg, data)
            return w
        except CharacteristicsError as exc:
            last = exc
    w = _bracketed(z, cfg, data)
    res = abs(cfg.a * w + cfg.s * complex(data.f0(w)) - z)
    if res > 10 * cfg.newton_tol * max(1.0, abs(z), cfg.a * abs(w)):
        raise CharacteristicsError(
            f"bracketing fallback left residual {res:.3e} at z={z}",
            res if last is None else min(res, last.residual))
    return w


def _trace_from_w(w: complex, cfg: CharacteristicSolve, data: InitialData) -> tuple[float, float]:
    f = complex(data.f0(w)) * cfg.growth
    return -f.imag / math.pi, f.real


def trace_density(x: float, cfg: CharacteristicSolve, data: InitialData,
                  w0: complex | None = None) -> tuple[float, float]:
    """``(rho(x, t), u(x, t))`` from the boundary value of ``f``."""
    w = backward_characteristic(complex(x, 0.0), cfg, data, w0)
    return _trace_from_w(w, cfg, data)


def trace_gradient(x: float, cfg: CharacteristicSolve, data: InitialData,
                   w0: complex | None = None) -> tuple[float, float, complex]:
    """``(d rho/dx, d (H rho)/dx, w)`` at a real point, using ``dw/dz = 1 / Z'(w)``."""
    w = backward_characteristic(complex(x, 0.0), cfg, data, w0)
    df = complex(data.df0(w)) / (cfg.a + cfg.s * complex(data.df0(w))) * cfg.growth
    return -df.imag / math.pi, df.real / math.pi, w


def trace(xs, cfg: CharacteristicSolve, data: InitialData, *, mode: str = "sequential",
          threads: int = 1) -> dict[str, np.ndarray]:
    """Trace ``rho`` and ``u`` at many points.

    ``sequential`` warm-starts each solve from the previous preimage;
    ``parallel`` uses independent cold starts across ``threads`` workers.
    """
    xs = np.asarray(xs, dtype=float)
    rho = np.empty_like(xs)
    u = np.empty_like(xs)
    ws = np.empty(xs.shape, dtype=complex)
    if mode == "sequential":
        w_prev = None
        for i, x in enumerate(xs):
            w = backward_characteristic(complex(x, 0.0), cfg, data, w_prev)
            ws[i] = w
            rho[i], u[i] = _trace_from_w(w, cfg, data)
            w_prev = w
    elif mode == "parallel":
        def one(x):
            return backward_characteristic(complex(x, 0.0), cfg, data)

        with ThreadPoolExecutor(max_workers=max(1, int(threads))) as ex:
            results = list(ex.map(one, xs))
        for i, w in enumerate(results):
            ws[i] = w
            rho[i], u[i] = _trace_from_w(w, cfg, data)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return {"x": xs, "rho": rho, "u": u, "w": ws}


# ---------------------------------------------------------------------------
# blow-up


@dataclass(frozen=True)
class BlowupReport:
    x0: float
    H_rho0_x0: float
    dHdx: float
    t_star: float
    gamma: float
    velocity_scale: float

    def foot_point(self, t):
        """Characteristic through the zero: ``x0 + c H rho0(x0) t``."""
        return self.x0 + self.velocity_scale * self.H_rho0_x0 * np.asarray(t, dtype=float)

    def as_dict(self) -> dict:
        return {"x0": self.x0, "t_star": self.t_star, "H_rho0_x0": self.H_rho0_x0,
                "dHdx": self.dHdx, "gamma": self.gamma, "velocity_scale": self.velocity_scale}


def blowup_estimate(rho0: GridField, gamma: float = 0.0, *, velocity_scale: float = math.pi,
                    x0: float | None = None) -> BlowupReport:
    """Predicted blow-up time for data with an interior zero.

    The flux velocity is ``velocity_scale * H rho``; ``pi`` is the Dyson
    equation, ``1`` gives ``t* = -1 / (d/dx H rho0)(x0)`` literally.  For
    ``gamma > 0`` the time is mapped back through the free-to-trapped
    rescaling, ``log(1 + 2 gamma t*) / (2 gamma)``.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    x = rho0.x
    v = rho0.values
    if x0 is None:
        # interior zero: a local minimum with substantial mass on both sides
        big = 1e-3 * v.max()
        left = np.maximum.accumulate(v)
        right = np.maximum.accumulate(v[::-1])[::-1]
        idx = np.arange(1, len(v) - 1)
        ok = ((v[idx] <= v[idx - 1]) & (v[idx] <= v[idx + 1])
              & (left[idx - 1] > big) & (right[idx + 1] > big))
        cand = idx[ok]
        if cand.size == 0:
            raise ValueError("density has no interior zero")
        i = int(cand[np.argmin(v[cand])])
        # vertex of the parabola through the three cells around the minimum
        den = v[i - 1] - 2 * v[i] + v[i + 1]
        shift = 0.5 * (v[i - 1] - v[i + 1]) / den if den > 0 else 0.0
        x0 = float(x[i] + np.clip(shift, -1.0, 1.0) * rho0.grid.dx)
    h = hilbert_transform(rho0).values
    dh = pv_derivative_of_hilbert(rho0).values
    h0 = float(np.interp(x0, x, h))
    d0 = float(np.interp(x0, x, dh))
    if d0 >= 0.0:
        raise ValueError(
            f"d/dx H rho0 at x0={x0:.6g} is {d0:.6g} >= 0; no blow-up predicted by this criterion")
    t_star = -1.0 / (velocity_scale * d0)
    if gamma > 0:
        t_star = math.log1p(2.0 * gamma * t_star) / (2.0 * gamma)
    return BlowupReport(x0, h0, d0, t_star, gamma, velocity_scale)


def steepening_time(data: InitialData, *, x0: float = 0.0, threshold: float = -1e3,
                    t_max: float, n_scan: int = 200, gamma: float = 0.0) -> float:
    """First time ``min_x d/dx H rho(x, t)`` falls below ``threshold``.

    ``data`` must be strictly positive (typically a zero-bearing density
    blended with a tiny positive component) and ``x0`` is where the
    unregularised density vanishes.  The minimum is searched on a geometric
    cluster of points around the characteristic through ``x0``, where the
    gradient concentrates.  Raises if no crossing occurs before ``t_max``.
    """
    offsets = np.concatenate([[0.0], 10.0 ** -np.arange(1, 11)])
    offsets = np.concatenate([-offsets[:0:-1], offsets])
    u0 = float(complex(data.f0(complex(x0, 0.0))).real)

    def min_grad(t):
        cfg = CharacteristicSolve(gamma=gamma, t=t)
        foot = cfg.a * x0 + cfg.s * u0
        return min(trace_gradient(foot + h, cfg, data)[1] for h in offsets)

    ts = np.linspace(0.0, t_max, n_scan + 1)
    ts[0] = 1e-3 * ts[1]
    vals = []
    for k, t in enumerate(ts):
        vals.append(min_grad(t))
        if vals[-1] < threshold:
            return brentq(lambda tt: min_grad(tt) - threshold, ts[k - 1], t, xtol=1e-12)
    # the regularised peak can be narrower than the scan spacing
    k = int(np.argmin(vals))
    lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, len(ts) - 1)]
    opt = minimize_scalar(min_grad, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13})
    if opt.fun < threshold:
        return brentq(lambda tt: min_grad(tt) - threshold, lo, opt.x, xtol=1e-12)
    raise CharacteristicsError(f"no steepening below {threshold} before t={t_max}")
