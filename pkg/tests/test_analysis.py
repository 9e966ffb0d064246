from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dysonlab.analysis import (FieldKind, Grid, GridField, UpperHalfPoint, hilbert_transform,
                               poisson_extend, pv_derivative_of_hilbert)
from dysonlab.oracles import rho_semicircle

# (1/pi) int rho_1(s) / (1 + s^2) ds and the conjugate value at (0.5, 1), by adaptive quadrature
P_SEMICIRCLE_0_1 = 0.19672632861669004
R_SEMICIRCLE_HALF_1 = 0.0432632866389042


def cauchy(x, eps=1.0):
    return eps / (np.pi * (x * x + eps * eps))


def semicircle_field(n=4096, L=8.0):
    g = Grid(-L, L, n)
    return GridField.sample(g, rho_semicircle, FieldKind.DENSITY)


def test_grid_invariants():
    g = Grid(-1.0, 1.0, 4)
    assert g.dx == 0.5
    np.testing.assert_allclose(g.centers, [-0.75, -0.25, 0.25, 0.75])
    assert Grid.from_json(g.to_json()) == g
    for bad in [(1.0, 1.0, 4), (0.0, 1.0, 1), (0.0, math.inf, 4)]:
        with pytest.raises(ValueError):
            Grid(*bad)


def test_gridfield_rejects_bad_values():
    g = Grid(0.0, 1.0, 4)
    with pytest.raises(ValueError):
        GridField(g, [0, 1, 2])
    with pytest.raises(ValueError):
        GridField(g, [0, 1, np.nan, 2])
    with pytest.raises(ValueError):
        GridField(g, [0, -1, 1, 2], FieldKind.DENSITY)


def test_gridfield_csv_round_trip(tmp_path):
    g = Grid(-2.0, 3.0, 16)
    f = GridField.sample(g, np.sin)
    p = tmp_path / "f.csv"
    f.to_csv(p)
    assert p.read_text().splitlines()[0] == "x,value"
    back = GridField.from_csv(p, g)
    np.testing.assert_array_equal(back.values, f.values)


def test_upper_half_point():
    assert UpperHalfPoint.of(1 + 2j).z == 1 + 2j
    with pytest.raises(ValueError):
        UpperHalfPoint(0.0, -1e-3)


def test_hilbert_semicircle_is_half_x():
    f = semicircle_field()
    h = hilbert_transform(f)
    m = np.abs(f.x) <= 1.9
    assert np.max(np.abs(np.pi * h.values[m] - f.x[m] / 2)) <= 1e-3


def test_hilbert_of_zero_is_zero():
    g = Grid(-1.0, 1.0, 64)
    assert np.all(hilbert_transform(GridField(g, np.zeros(64))).values == 0.0)
    assert np.all(pv_derivative_of_hilbert(GridField(g, np.zeros(64))).values == 0.0)


def test_hilbert_rejects_small_grids():
    with pytest.raises(ValueError):
        hilbert_transform(GridField(Grid(0.0, 1.0, 7), np.ones(7)))


def test_hilbert_of_cauchy_matches_closed_form():
    # closed form H[eps/(pi(x^2+eps^2))] = x/(pi(x^2+eps^2)); 1/(2 pi) at x = 1
    g = Grid(-400.0, 400.0, 16000)
    f = GridField.sample(g, cauchy)
    h = hilbert_transform(f)
    val = np.interp(1.0, g.centers, h.values)
    assert val == pytest.approx(1.0 / (2.0 * np.pi), abs=2e-4)


def test_pv_derivative_semicircle_and_cauchy():
    f = semicircle_field()
    d = pv_derivative_of_hilbert(f)
    m = np.abs(f.x) <= 1.8
    assert np.max(np.abs(np.pi * d.values[m] - 0.5)) <= 2e-3
    g = Grid(-100.0, 100.0, 20000)
    dc = pv_derivative_of_hilbert(GridField.sample(g, cauchy))
    assert np.interp(0.0, g.centers, dc.values) == pytest.approx(1.0 / np.pi, abs=2e-4)


def test_hilbert_anti_involution_on_smooth_bump():
    g = Grid(-40.0, 40.0, 8192)
    f = GridField.sample(g, lambda x: np.exp(-x * x))
    hh = hilbert_transform(hilbert_transform(f))
    m = np.abs(g.centers) <= 5
    # tail of H f decays like 1/x, so the second transform sees O(1/L) truncation
    assert np.max(np.abs(hh.values[m] + f.values[m])) <= 2e-2


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2 ** 31 - 1))
def test_hilbert_linearity(a, b, seed):
    r = np.random.default_rng(seed)
    g = Grid(-1.0, 1.0, 64)
    f, h = r.standard_normal(64), r.standard_normal(64)
    lhs = hilbert_transform(GridField(g, a * f + b * h)).values
    rhs = a * hilbert_transform(GridField(g, f)).values + b * hilbert_transform(GridField(g, h)).values
    scale = max(1.0, np.max(np.abs(rhs)))
    assert np.max(np.abs(lhs - rhs)) <= 1e-13 * scale * 64


def test_hilbert_thread_independent_deterministic():
    f = semicircle_field(1024)
    assert np.array_equal(hilbert_transform(f).values, hilbert_transform(f).values)


def test_poisson_extend_cauchy():
    g = Grid(-4000.0, 4000.0, 400000)
    f = GridField.sample(g, cauchy)
    P, R = poisson_extend(f, 0.0, 1.0)
    # Poisson extension of Cauchy(eps) is Cauchy(eps + y)
    assert P == pytest.approx(1.0 / (2.0 * np.pi), abs=1e-4)
    assert abs(R) <= 1e-12


def test_poisson_extend_semicircle_against_quadrature():
    f = semicircle_field()
    P, R = poisson_extend(f, 0.0, 1.0)
    assert P == pytest.approx(P_SEMICIRCLE_0_1, abs=1e-6)
    assert abs(R) <= 1e-12
    _, R2 = poisson_extend(f, 0.5, 1.0)
    assert R2 == pytest.approx(R_SEMICIRCLE_HALF_1, abs=1e-6)


def test_poisson_extend_vanishes_at_infinity_and_rejects_bad_y():
    f = semicircle_field(512)
    vals = [poisson_extend(f, 0.3, y)[0] for y in (1.0, 10.0, 100.0, 1e4)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-4
    for y in (0.0, -1.0):
        with pytest.raises(ValueError):
            poisson_extend(f, 0.0, y)
    with pytest.raises(ValueError):
        poisson_extend(f, np.nan, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-10, 10), st.floats(1e-3, 50), st.integers(0, 2 ** 31 - 1))
def test_poisson_positivity(x, y, seed):
    r = np.random.default_rng(seed)
    g = Grid(-2.0, 2.0, 32)
    vals = np.abs(r.standard_normal(32))
    vals[r.integers(32)] += 0.1
    P, _ = poisson_extend(GridField(g, vals, FieldKind.DENSITY), x, y)
    assert P > 0


def test_poisson_recovers_boundary_value():
    g = Grid(-10.0, 10.0, 8000)
    f = GridField.sample(g, lambda x: np.exp(-x * x))
    errs = [abs(poisson_extend(f, 0.3, y)[0] - math.exp(-0.09)) for y in (0.08, 0.04, 0.02)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.03
