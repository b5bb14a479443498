import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
import sympy

from dynequi.core import critical_points, green_value, orbit_jet
from dynequi.fields import Rect
from dynequi.measures import log_potential
from dynequi.param import (
    CubicSliceSpec,
    cubic_derivative_field,
    cubic_poly,
    cubic_slice_experiment,
    escape_estimate_check,
    leading_log_correction,
    mandelbrot_green,
    mandelbrot_green_grid,
    param_chain_product,
    param_potential_field,
    param_solve,
    quadratic,
    sample_escaped_parameters,
)
from oracles import green_mp


def test_mandelbrot_green_examples():
    assert mandelbrot_green(0) == (0.0, False)
    assert mandelbrot_green(-2) == (0.0, False)
    g, ok = mandelbrot_green(-3)
    assert ok and abs(g - green_mp((-3, 0, 1), -3)) <= 1e-12
    g, ok = mandelbrot_green(0.5 + 0.5j)
    assert ok and abs(g - green_mp((0.5 + 0.5j, 0, 1), 0.5 + 0.5j)) <= 1e-12


def test_mandelbrot_green_grid_matches_pointwise():
    fld = mandelbrot_green_grid(Rect(-2.5, 1.5, -2, 2), (9, 9))
    for z, v, m in zip(fld.points.ravel(), fld.values.ravel(), fld.mask.ravel()):
        g, ok = mandelbrot_green(z)
        assert ok == m
        assert abs(g - v) <= 1e-11


@pytest.mark.parametrize("c", [0.3 + 0.2j, -1.2 + 0.1j, 0.26, -2.0, 1 + 1j])
def test_chain_product_matches_jet(c):
    for n in (1, 5, 15):
        a = param_chain_product(c, n)
        b = orbit_jet(quadratic(c), c, n, 1).entry(n, 1)
        # (p_c^n)'(c) as a map of z at z = c, times 2^n / 2: both equal 2^n prod p_c^k(c)
        la, lb = a.log_abs()[()], b.log_abs()[()]
        assert abs(la - lb) <= 1e-10 * max(1, abs(la))


def test_chain_product_high_precision():
    mpmath.mp.dps = 40
    c = mpmath.mpc(0.1, 0.9)
    w, prod = c, mpmath.mpf(2) ** 20
    for _ in range(20):
        prod *= w
        w = w * w + c
    got = param_chain_product(complex(c), 20)
    assert abs(got.log_abs()[()] - float(mpmath.log(abs(prod)))) <= 1e-10


def test_leading_coefficient_symbolic():
    c = sympy.symbols("c")
    for n in range(1, 6):
        w, prod = c, sympy.Integer(2) ** n
        for _ in range(n):
            prod *= w
            w = sympy.expand(w * w + c)
        poly = sympy.Poly(sympy.expand(prod), c)
        assert poly.degree() == 2**n - 1
        assert poly.LC() == 2**n
        assert math.isclose(leading_log_correction(n), math.log(poly.LC()) / 2**n)


@pytest.mark.parametrize("n", range(1, 7))
def test_param_mass(n):
    cloud = param_solve(n, [1])
    assert cloud.exact_mass == Fraction(2**n - 1, 2**n)
    assert cloud.residuals.max() <= 1e-6


def test_param_lambda_polynomial():
    cloud = param_solve(3, [0.5, 1j, 0.25])
    assert cloud.exact_mass == Fraction(7, 8)
    with pytest.raises(ValueError):
        param_solve(2, [1, 1, 1, 1])


def test_param_potential_identity():
    lam = [0.5, 0.1j]
    cloud = param_solve(4, lam)
    u = param_potential_field(4, lam, Rect(-2.5, 1.5, -2, 2), (21, 21))
    direct = log_potential(cloud, u.points) + leading_log_correction(4)
    ok = u.mask & np.isfinite(direct)
    assert np.max(np.abs(u.values[ok] - direct[ok])) <= 1e-8


def test_escape_estimate_rejects_interior():
    with pytest.raises(ValueError):
        escape_estimate_check([0.1], range(5, 8))
    with pytest.raises(ValueError):
        escape_estimate_check([0.26], range(5, 8))  # escapes, but g_M is tiny


def test_escape_estimate_bounded():
    samples = sample_escaped_parameters(20, seed=4)
    rep = escape_estimate_check(samples, range(5, 13))
    assert rep.errors.shape == (20, 8)
    assert rep.passed
    assert np.all(rep.c_hat < 1.0)


def test_cubic_family_critical_points():
    c, a = 0.7 - 0.2j, 0.4 + 0.1j
    pts = sorted((z for z, _ in critical_points(cubic_poly(c, a))), key=lambda z: z.real)
    assert np.allclose([0, c], pts, atol=1e-10)


def test_cubic_field_matches_jet():
    spec = CubicSliceSpec((0.3 + 0.1j, 0.5j), (1, 0), 1, 4, 0.5)
    c, a = 0.8 + 0.2j, 0.5j
    f = cubic_poly(c, a)
    v = f(c)
    D = orbit_jet(f, v, 4, 1).value(4, 1)
    ref = math.log(abs(D - 0.5)) / 3**4
    assert abs(cubic_derivative_field(spec, np.array([c]), np.array([a]))[0] - ref) <= 1e-12


def test_cubic_slice_functional_equation():
    spec = CubicSliceSpec((0j, 0.5 + 0j), (1, 0), 1, 6)
    rep = cubic_slice_experiment(spec, Rect(-3, 3, -3, 3), (24, 24))
    assert rep.escaped_fraction > 0.2
    assert rep.functional_equation_error <= 1e-10
    assert rep.closer in ("critical_point", "critical_value")
    # cross-check one point by the scalar Green function
    i = np.flatnonzero(rep.field.mask.ravel())[0]
    t = rep.field.points.ravel()[i]
    c, a = spec.parameters(t)
    g, ok = green_value(cubic_poly(complex(c), complex(a)), complex(c))
    assert ok and abs(g - rep.green_critical.values.ravel()[i]) <= 1e-10


def test_cubic_slice_all_masked():
    # a = 0: the critical point 0 is fixed, so nothing escapes
    spec = CubicSliceSpec((1 + 0j, 0j), (1, 0), 0, 3)
    rep = cubic_slice_experiment(spec, Rect(-1, 1, -1, 1), (8, 8))
    assert rep.escaped_fraction == 0.0
    assert rep.sup_to_critical is None and rep.closer is None


def test_cubic_spec_validation():
    with pytest.raises(ValueError):
        CubicSliceSpec((0j, 0j), (0, 0), 0, 3)
    with pytest.raises(ValueError):
        CubicSliceSpec((0j, 0j), (1, 0), 2, 3)
