"""Closed-form solutions of the Dyson equation and related transforms.

Conventions: the Dyson equation is ``rho_t + (rho (pi H rho - gamma x))_x = 0``
and the Stieltjes transform is ``S mu(z) = int mu(dy) / (z - y)`` (no 1/pi).
With that normalisation the boundary value from the upper half plane is
``pi H rho - i pi rho``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SemicircleLaw",
    "SelfSimilarSolution",
    "rho_semicircle",
    "rho_selfsim",
    "u_selfsim",
    "rho_steady",
    "second_moment_law",
    "stieltjes_semicircle",
    "rescale_gamma_to_zero",
    "oracle_table",
]

_CUT_EPS = 1e-14


def _csqrt_cut(z):
    """``sqrt(z^2 - 4)`` with the cut on [-2, 2] and Im > 0 on the upper half plane."""
    z = np.asarray(z, dtype=complex)
    return np.sqrt(z - 2.0) * np.sqrt(z + 2.0)


def stieltjes_semicircle(z, side: str = "interior"):
    """Stieltjes transform ``f1(z) = (z - sqrt(z^2 - 4)) / 2`` of the unit semicircle law.

    ``side`` is ``"interior"`` for points off the cut, or ``"upper_trace"`` /
    ``"lower_trace"`` for real arguments approached from above / below.
    """
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise ValueError("z must be finite")
    if side == "interior":
        on_cut = (np.abs(z.imag) < _CUT_EPS) & (np.abs(z.real) <= 2.0)
        if np.any(on_cut):
            raise ValueError("interior evaluation requested on the branch cut [-2, 2]")
        # equal to (z - root) / 2, written to avoid cancellation at large |z|
        out = 2.0 / (z + _csqrt_cut(z))
    elif side in ("upper_trace", "lower_trace"):
        if np.any(z.imag != 0.0):
            raise ValueError("trace evaluation needs real arguments")
        x = z.real
        inside = np.abs(x) <= 2.0
        root = np.sqrt(np.abs(x * x - 4.0))
        sign = -1.0 if side == "upper_trace" else 1.0
        out = np.where(inside, 0.5 * (x + sign * 1j * root),
                       0.5 * (x - np.sign(x) * root)).astype(complex)
    else:
        raise ValueError(f"unknown side {side!r}")
    return complex(out) if scalar else out


def _dstieltjes_semicircle(z):
    z = np.asarray(z, dtype=complex)
    return 0.5 * (1.0 - z / _csqrt_cut(z))


@dataclass(frozen=True)
class SemicircleLaw:
    """Probability density ``2 sqrt((r^2 - x^2)_+) / (pi r^2)``."""

    radius: float = 2.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def density(self, x):
        r = self.radius
        x = np.asarray(x, dtype=float)
        return 2.0 * np.sqrt(np.clip(r * r - x * x, 0.0, None)) / (np.pi * r * r)

    def _s(self, x):
        return np.clip(np.asarray(x, dtype=float) / self.radius, -1.0, 1.0)

    def cdf(self, x):
        s = self._s(x)
        return 0.5 + (s * np.sqrt(1.0 - s * s) + np.arcsin(s)) / np.pi

    def cdf_antiderivative(self, x):
        """``G(x) = int_{-r}^x F``; linear with slope 1 past the right edge."""
        r = self.radius
        x = np.asarray(x, dtype=float)
        s = self._s(x)

        def prim(s):
            c = np.sqrt(1.0 - s * s)
            return s / 2.0 + (s * np.arcsin(s) + c - c ** 3 / 3.0) / np.pi

        return r * (prim(s) - prim(-1.0)) + np.clip(x - r, 0.0, None)

    def partial_moment(self, x, k: int):
        """``int_{-r}^x y^k rho(y) dy`` for k in {0, 1, 2}."""
        r = self.radius
        xc = np.clip(np.asarray(x, dtype=float), -r, r)
        c = 2.0 / (np.pi * r * r)
        q = np.sqrt(np.clip(r * r - xc * xc, 0.0, None))
        if k == 0:
            return self.cdf(xc)
        if k == 1:
            return -c * q ** 3 / 3.0
        if k == 2:
            def prim(y, q):
                return (y * (2 * y * y - r * r) * q + r ** 4 * np.arcsin(np.clip(y / r, -1, 1))) / 8.0
            return c * (prim(xc, q) - prim(-r, 0.0))
        raise ValueError("k must be 0, 1 or 2")

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        if np.any((q < 0) | (q > 1)):
            raise ValueError("quantile levels must lie in [0, 1]")
        lo = np.full(q.shape, -self.radius)
        hi = np.full(q.shape, self.radius)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < q
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def stieltjes(self, z):
        r = self.radius
        return (2.0 / r) * stieltjes_semicircle(2.0 * np.asarray(z) / r)

    @property
    def second_moment(self) -> float:
        return self.radius ** 2 / 4.0


def rho_semicircle(x, radius: float = 2.0):
    return SemicircleLaw(radius).density(x)


@dataclass(frozen=True)
class SelfSimilarSolution:
    """Semicircle solutions: ``gamma = 0`` self-similar, ``gamma > 0`` sigma family.

    For ``gamma > 0`` the density is ``sqrt((2 sigma - x^2)_+) / (pi sigma)`` with
    ``sigma(t) = 1/gamma - (1 - gamma sigma0) exp(-2 gamma t) / gamma``; for
    ``gamma = 0`` it is ``sqrt((4t - x^2)_+) / (2 pi t)``.  Both are semicircle
    laws of radius ``sqrt(2 sigma)`` (with ``sigma = 2t`` when gamma = 0).
    """

    gamma: float = 0.0
    sigma0: float = 1.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")

    def sigma(self, t):
        t = np.asarray(t, dtype=float)
        g = self.gamma
        if g == 0.0:
            if np.any(t <= 0):
                raise ValueError("t must be positive when gamma = 0")
            return 2.0 * t
        s = 1.0 / g - (1.0 - g * self.sigma0) * np.exp(-2.0 * g * t) / g
        if np.any(s <= 0):
            raise ValueError("sigma(t) must stay positive")
        return s

    def radius(self, t):
        return np.sqrt(2.0 * self.sigma(t))

    def rho(self, x, t):
        s = self.sigma(t)
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.clip(2.0 * s - x * x, 0.0, None)) / (np.pi * s)

    def u(self, x, t):
        s = self.sigma(t)
        x = np.asarray(x, dtype=float)
        disc = np.sqrt(np.clip(x * x - 2.0 * s, 0.0, None))
        return (x - np.sign(x) * disc) / s


def rho_selfsim(x, t, gamma: float = 0.0, sigma0: float = 1.0):
    return SelfSimilarSolution(gamma, sigma0).rho(x, t)


def u_selfsim(x, t, gamma: float = 0.0, sigma0: float = 1.0):
    return SelfSimilarSolution(gamma, sigma0).u(x, t)


def rho_steady(x, gamma: float):
    """Steady state ``sqrt((2 gamma - gamma^2 x^2)_+) / pi``."""
    if not gamma > 0:
        raise ValueError("steady state needs gamma > 0")
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.clip(2.0 * gamma - gamma * gamma * x * x, 0.0, None)) / np.pi


def second_moment_law(t, gamma: float, m2_0: float, mass: float = 1.0):
    t = np.asarray(t, dtype=float)
    if gamma == 0.0:
        return m2_0 + mass * mass * t
    a = mass * mass / (2.0 * gamma)
    return a - (mass * mass - 2.0 * gamma * m2_0) * np.exp(-2.0 * gamma * t) / (2.0 * gamma)


def rescale_gamma_to_zero(t: float, gamma: float) -> tuple[float, float]:
    """Map time ``t`` of the trapped problem to ``(tau, scale)`` of the free one.

    If ``rho0`` solves the gamma = 0 problem then
    ``scale * rho0(scale * x, tau + c)`` solves the trapped one, with
    ``tau = (exp(2 gamma t) - 1) / (2 gamma)`` and ``scale = exp(gamma t)``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return math.expm1(2.0 * gamma * t) / (2.0 * gamma), math.exp(gamma * t)


def oracle_table(t: float, x, gamma: float = 0.0, sigma0: float = 1.0) -> dict[str, np.ndarray]:
    sol = SelfSimilarSolution(gamma, sigma0)
    x = np.asarray(x, dtype=float)
    return {"x": x, "rho": sol.rho(x, t), "u": sol.u(x, t)}
