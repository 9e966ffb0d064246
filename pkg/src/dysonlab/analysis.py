"""Uniform 1-D grids, grid fields and the discrete singular integrals.

The Hilbert transform here uses the odd-offset symmetric-gap rule: the
singular cell and every cell at an even offset from it are skipped, the
remaining cells get weight ``2 dx``.  The singularity then sits on the
common boundary of two mirror cells, the ``1/(x-y)`` part cancels exactly,
and the rule is second-order accurate for smooth data.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

__all__ = [
    "FieldKind",
    "Grid",
    "GridField",
    "UpperHalfPoint",
    "hilbert_transform",
    "pv_derivative_of_hilbert",
    "poisson_extend",
    "stieltjes_of_field",
    "dstieltjes_of_field",
    "MIN_HILBERT_CELLS",
]

MIN_HILBERT_CELLS = 8


class FieldKind(str, Enum):
    DENSITY = "density"
    VELOCITY = "velocity"
    RIEMANN_INVARIANT = "riemann_invariant"
    GENERIC = "generic"


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred grid on ``[x_min, x_max]``."""

    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self):
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)):
            raise ValueError("grid bounds must be finite")
        if not self.x_max > self.x_min:
            raise ValueError(f"x_max ({self.x_max}) must exceed x_min ({self.x_min})")
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValueError(f"n_cells must be an integer >= 2, got {self.n_cells}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def faces(self) -> np.ndarray:
        return self.x_min + np.arange(self.n_cells + 1) * self.dx

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    def to_json(self) -> str:
        return json.dumps({"x_min": self.x_min, "x_max": self.x_max, "n_cells": self.n_cells})

    @classmethod
    def from_json(cls, text: str) -> "Grid":
        d = json.loads(text)
        return cls(float(d["x_min"]), float(d["x_max"]), int(d["n_cells"]))


@dataclass(frozen=True, eq=False)
class GridField:
    """Cell values on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray
    kind: FieldKind = FieldKind.GENERIC

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n_cells,):
            raise ValueError(
                f"expected {self.grid.n_cells} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        kind = FieldKind(self.kind)
        if kind is FieldKind.DENSITY and np.any(vals < 0.0):
            raise ValueError("density field has negative values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "kind", kind)

    @classmethod
    def sample(cls, grid: Grid, func, kind: FieldKind | str = FieldKind.GENERIC) -> "GridField":
        return cls(grid, np.asarray(func(grid.centers), dtype=float), FieldKind(kind))

    @property
    def x(self) -> np.ndarray:
        return self.grid.centers

    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.dx)

    def with_values(self, values, kind: FieldKind | str | None = None) -> "GridField":
        return GridField(self.grid, values, self.kind if kind is None else FieldKind(kind))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "value"])
            for xi, vi in zip(self.x, self.values):
                w.writerow([repr(float(xi)), repr(float(vi))])

    @classmethod
    def from_csv(cls, path: str | Path, grid: Grid,
                 kind: FieldKind | str = FieldKind.GENERIC) -> "GridField":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if rows[0] != ["x", "value"]:
            raise ValueError(f"unexpected CSV header {rows[0]}")
        vals = np.array([float(r[1]) for r in rows[1:]])
        return cls(grid, vals, FieldKind(kind))


@dataclass(frozen=True)
class UpperHalfPoint:
    re: float
    im: float

    def __post_init__(self):
        if not (np.isfinite(self.re) and np.isfinite(self.im)):
            raise ValueError("point must be finite")
        if self.im < 0.0:
            raise ValueError(f"imaginary part must be >= 0, got {self.im}")

    @property
    def z(self) -> complex:
        return complex(self.re, self.im)

    @classmethod
    def of(cls, z) -> "UpperHalfPoint":
        if isinstance(z, UpperHalfPoint):
            return z
        z = complex(z)
        return cls(z.real, z.imag)


def _check_hilbert_input(f: GridField) -> None:
    if f.grid.n_cells < MIN_HILBERT_CELLS:
        raise ValueError(
            f"Hilbert transform needs at least {MIN_HILBERT_CELLS} cells, got {f.grid.n_cells}")


def _odd_offset_kernel(n: int) -> np.ndarray:
    m = np.arange(-(n - 1), n)
    k = np.zeros(2 * n - 1)
    odd = (m % 2) != 0
    k[odd] = 2.0 / m[odd]
    return k


def hilbert_transform(f: GridField) -> GridField:
    """Discrete principal value ``(1/pi) p.v. int f(y)/(x - y) dy`` at cell centres.

    Values outside the grid are taken to be zero; the truncation error is of
    order (mass outside the grid) / (distance to the grid edge).
    """
    _check_hilbert_input(f)
    n = f.grid.n_cells
    # np.convolve is a direct sum with a fixed order, so the result does not
    # depend on threading.
    full = np.convolve(f.values, _odd_offset_kernel(n))
    h = full[n - 1:2 * n - 1] / np.pi
    return GridField(f.grid, h, FieldKind.GENERIC)


def pv_derivative_of_hilbert(f: GridField) -> GridField:
    """``d/dx (H f)`` by centred differences of :func:`hilbert_transform`."""
    h = hilbert_transform(f)
    return GridField(f.grid, np.gradient(h.values, f.grid.dx), FieldKind.GENERIC)


def stieltjes_of_field(f: GridField, w) -> np.ndarray:
    """Midpoint-rule Stieltjes transform ``sum_j f_j dx / (w - x_j)``."""
    w = np.asarray(w, dtype=complex)
    x = f.x
    out = (f.values * f.grid.dx / (w[..., None] - x)).sum(axis=-1)
    return out


def dstieltjes_of_field(f: GridField, w) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    x = f.x
    return -(f.values * f.grid.dx / (w[..., None] - x) ** 2).sum(axis=-1)


def poisson_extend(f: GridField, x: float, y: float) -> tuple[float, float]:
    """Poisson and conjugate-Poisson extensions ``(P f(x, y), R f(x, y))``.

    ``P_y(s) = y / (pi (s^2 + y^2))`` and ``R_y(s) = s / (pi (s^2 + y^2))``.
    """
    if not (np.isfinite(x) and np.isfinite(y)):
        raise ValueError("x and y must be finite")
    if y <= 0.0:
        raise ValueError(f"y must be positive, got {y}")
    s = x - f.x
    den = np.pi * (s * s + y * y)
    w = f.values * f.grid.dx
    return float(np.sum(w * y / den)), float(np.sum(w * s / den))
