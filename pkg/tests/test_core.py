import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import polynomial as P

from dynequi.core import (
    Poly,
    classify_critical_orbits,
    critical_points,
    derivative,
    green_grid,
    green_value,
    normalize_monic,
    orbit_jet,
)
from dynequi.fields import Rect
from oracles import green_mp, iterate_coeffs


def test_poly_basics():
    f = Poly((1, 0, 1, 0, 0))
    assert f.degree == 2 and f.leading == 1
    assert Poly(()).degree == 0
    assert Poly((3, 0, 0)).escape_radius == math.inf


def test_escape_radius_doubles():
    rng = np.random.default_rng(3)
    for coeffs in [(0, 0, 1), (-1, 0, 1), (0.25j, 0, 1), (0, -1, 0, 1), (1, 2, -3, 0.5), (5, 0, 2)]:
        f = Poly(coeffs)
        z = f.escape_radius * (1 + 1e-9) * np.exp(2j * np.pi * rng.random(200))
        assert np.all(np.abs(f(z)) > 2 * np.abs(z))


def test_normalize_monic_examples():
    g = normalize_monic(Poly((0, 0, 2)))
    assert np.allclose(g.coeffs, (0, 0, 1))
    assert np.isclose(g.monic_conjugacy[0], 2)
    g = normalize_monic(Poly((0.3, 0, 1)))
    assert g.monic_conjugacy == (1, 0)
    f = Poly((1, 0, 0, 3))
    g = normalize_monic(f)
    s, t = g.monic_conjugacy
    assert g.is_monic
    z = np.random.default_rng(0).normal(size=100) + 1j * np.random.default_rng(1).normal(size=100)
    assert np.allclose(g(s * z + t), s * f(z) + t, rtol=1e-12, atol=1e-12)


def test_normalize_monic_critical_points_round_trip():
    f = Poly((1, -2, 0.5, 3))
    g = normalize_monic(f)
    s, t = g.monic_conjugacy
    back = sorted((complex((c - t) / s) for c, _ in critical_points(g)), key=lambda z: (z.real, z.imag))
    ref = sorted((c for c, _ in critical_points(f)), key=lambda z: (z.real, z.imag))
    assert np.allclose(back, ref, atol=1e-10)


def test_derivative_examples():
    assert derivative(Poly((1, 0, 1))).coeffs == (0, 2)
    assert derivative(Poly((0, 0, 0, 1))).coeffs == (0, 0, 3)
    assert derivative(derivative(Poly((0, 0, 0, 0, 1)))).coeffs == (0, 0, 12)


def test_critical_point_examples():
    assert critical_points(Poly((0.7, 0, 1))) == [(0j, 1)]
    pts = sorted(critical_points(Poly((0, -3, 0, 1))), key=lambda c: c[0].real)
    assert np.allclose([c for c, _ in pts], [-1, 1]) and [m for _, m in pts] == [1, 1]
    (c, m), = critical_points(Poly((0, 0, 0, 0, 0.25)))
    assert abs(c) < 1e-10 and m == 3


def test_orbit_jet_examples():
    j = orbit_jet(Poly((1, 0, 1)), 1, 2, 1)
    assert j.value(2, 0) == 5 and j.value(2, 1) == 8
    j = orbit_jet(Poly((1, 0, 1)), 0, 2, 2)
    assert j.value(2, 1) == 0 and j.value(2, 2) == 4
    assert orbit_jet(Poly((0, 0, 1)), 1, 3, 1).value(3, 1) == 8
    j = orbit_jet(Poly((-1, 0, 1)), 0.3, 4, 3)
    assert j.value(0, 0) == 0.3 and j.value(0, 1) == 1 and j.value(0, 2) == 0 and j.value(0, 3) == 0


poly2 = st.tuples(
    st.complex_numbers(max_magnitude=1.5), st.complex_numbers(max_magnitude=1.5)
).map(lambda t: Poly((t[0], t[1], 1)))


@given(poly2, st.complex_numbers(max_magnitude=1.2), st.integers(1, 10), st.integers(0, 10))
def test_chain_rule(f, z, m, n):
    full = orbit_jet(f, z, m + n, 1)
    inner = orbit_jet(f, z, n, 1)
    w = inner.value(n, 0)
    outer = orbit_jet(f, w, m, 1)
    lhs = full.entry(m + n, 1)
    rhs = outer.entry(m, 1) * inner.entry(n, 1)
    la, lb = lhs.log_abs()[()], rhs.log_abs()[()]
    if np.isneginf(la) or np.isneginf(lb):
        assert la == lb
        return
    assert abs(la - lb) <= 1e-10 * max(1, abs(la))
    assert abs(np.angle(np.exp(1j * (lhs.angle()[()] - rhs.angle()[()])))) <= 1e-9


@pytest.mark.parametrize("coeffs", [(-1, 0, 1), (0.25j, 0, 1), (0.3 - 0.2j, 0.5, 1)])
def test_jet_matches_expansion(coeffs):
    rng = np.random.default_rng(7)
    f = Poly(coeffs)
    for n in range(1, 7):
        der = P.polyder(iterate_coeffs(coeffs, n))
        z = 2 * np.sqrt(rng.random(100)) * np.exp(2j * np.pi * rng.random(100))
        ref = P.polyval(z, der)
        got = np.array([orbit_jet(f, zz, n, 1).value(n, 1) for zz in z])
        # Horner on expanded coefficients carries a rounding floor of eps * sum |a_i||z|^i
        floor = 1e-14 * P.polyval(np.abs(z), np.abs(der))
        assert np.all(np.abs(got - ref) <= 1e-8 * np.abs(ref) + floor)


def test_green_examples():
    g, ok = green_value(Poly((0, 0, 1)), 2)
    assert ok and abs(g - math.log(2)) <= 1e-12
    assert green_value(Poly((0, 0, 1)), 0.5) == (0.0, False)
    f = Poly((-1, 0, 1))
    a, _ = green_value(f, 3, tol=1e-9, budget=50)
    b, _ = green_value(f, 3, tol=1e-9, budget=54)
    assert abs(a - b) <= 1e-9
    assert abs(a - green_mp((-1, 0, 1), 3)) <= 1e-9


def test_green_functional_equation():
    f = Poly((0.3 + 0.5j, 0, 1))
    rng = np.random.default_rng(11)
    z = 3 * (rng.random(200) - 0.5) + 3j * (rng.random(200) - 0.5)
    for zz in z:
        g, ok = green_value(f, zz)
        if ok:
            g2, ok2 = green_value(f, f(zz))
            assert ok2 and abs(g2 - 2 * g) <= 2e-12 * 2 + 1e-15 * g2


def test_green_grid_power_map():
    rect = Rect(-2, 2, -2, 2)
    fld = green_grid(Poly((0, 0, 1)), rect, (64, 64))
    z = fld.points
    ok = fld.mask
    assert np.all(np.abs(fld.values[ok] - np.maximum(0, np.log(np.abs(z[ok])))) <= 1e-12)
    one = green_grid(Poly((0, 0, 1)), Rect(2, 2, 0, 0), (1, 1))
    assert one.values[0, 0] == green_value(Poly((0, 0, 1)), 2)[0]
    assert np.all(fld.values >= 0)
    assert np.all(fld.values[~fld.mask] == 0)


def test_green_grid_subharmonic():
    fld = green_grid(Poly((-1, 0, 1)), Rect(-2, 2, -2, 2), (128, 128))
    v, m = fld.values, fld.mask
    mean = (v[1:-1, 2:] + v[1:-1, :-2] + v[2:, 1:-1] + v[:-2, 1:-1]) / 4
    inner = m[1:-1, 1:-1] & (v[1:-1, 1:-1] > 0)
    # g is harmonic off the Julia set, so the 5-point mean differs from the
    # center only by O(h^4) truncation; tolerate 0.1 h^2
    h = fld.spacing[0]
    violated = inner & (mean < v[1:-1, 1:-1] - 0.1 * h * h)
    assert violated.sum() < 0.01 * inner.sum()


def test_non_monic_green():
    # g_f for f = 2z^2 is log|2z| in the conjugate coordinate w = 2z
    g, ok = green_value(Poly((0, 0, 2)), 3)
    assert ok and abs(g - math.log(6)) <= 1e-12


@pytest.mark.parametrize(
    "coeffs,hyper,escaping,undetermined",
    [
        ((0, 0, 1), True, False, False),
        ((-1, 0, 1), True, False, False),
        ((1, 0, 1), True, True, False),
        ((0.25j, 0, 1), True, False, False),
        ((0.25, 0, 1), False, False, True),
    ],
)
def test_classification(coeffs, hyper, escaping, undetermined):
    c = classify_critical_orbits(Poly(coeffs))
    assert c.hyperbolic is hyper
    assert c.has_escaping_critical is escaping
    assert c.undetermined is undetermined
    for fate in c.fates:
        if fate.kind == "attracted":
            assert abs(fate.multiplier) < 1 - 1e-6


def test_classification_cycle_data():
    c = classify_critical_orbits(Poly((-1, 0, 1)))
    (fate,) = c.fates
    assert fate.period == 2 and abs(fate.multiplier) < 1e-12
    assert sorted(round(z.real) for z in fate.cycle) == [-1, 0]
