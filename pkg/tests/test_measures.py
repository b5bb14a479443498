import math

import numpy as np
import pytest

from dynequi import _parallel
from dynequi.core import Poly, green_grid, green_value
from dynequi.fields import GridField, GridMismatch, Rect
from dynequi.measures import (
    TestFunctionSet,
    angular_discrepancy,
    brolin_sample,
    discrepancy_potential,
    log_potential,
    pb_average_field,
    u_n_field,
    weak_pairing,
)
from dynequi.roots import ParamDerivative, PhaseDerivative, RootCloud, solve_all

Z2 = Poly((0, 0, 1))
BASILICA = Poly((-1, 0, 1))
SQUARE = Rect(-2, 2, -2, 2)


def test_log_potential_examples():
    c = solve_all(PhaseDerivative(Z2, 3, 1, 8))
    assert abs(log_potential(c, 2) - math.log(127) / 7) <= 1e-14
    unit = RootCloud([0j], [1], [0.0], 1)
    assert abs(log_potential(unit, math.e) - 1) <= 1e-15
    assert log_potential(unit, 0) == -math.inf
    u = u_n_field(PhaseDerivative(Z2, 3, 1, 8), Rect(2, 2, 0, 0), (1, 1))
    assert abs(u.values[0, 0] - log_potential(c, 2)) <= 1e-10


def test_u_n_examples():
    u = u_n_field(PhaseDerivative(Z2, 10, 1, 8), Rect(2, 2, 0, 0), (1, 1))
    assert abs(u.values[0, 0] - math.log(2)) <= 0.01
    u = u_n_field(ParamDerivative(1, (0j,)), Rect(2, 2, 0, 0), (1, 1))
    assert abs(u.values[0, 0] - math.log(2)) <= 1e-15


@pytest.mark.parametrize("p", [PhaseDerivative(BASILICA, 6, 1, 1), PhaseDerivative(Poly((0.25j, 0, 1)), 4, 2, 2 + 1j)])
def test_potential_identity(p):
    c = solve_all(p)
    u = u_n_field(p, SQUARE, (41, 41))
    direct = log_potential(c, u.points)
    ok = u.mask & np.isfinite(direct)
    assert np.max(np.abs(u.values[ok] - direct[ok])) <= 1e-8


def test_harmonicity_probe():
    p = PhaseDerivative(BASILICA, 6, 1, 1)
    c = solve_all(p)
    u = u_n_field(p, SQUARE, (128, 128))
    v = u.values
    h = u.spacing[0]
    lap = v[1:-1, 2:] + v[1:-1, :-2] + v[2:, 1:-1] + v[:-2, 1:-1] - 4 * v[1:-1, 1:-1]
    pts = u.points[1:-1, 1:-1]
    # sup-norm distance to the nearest root, in grid steps
    dist = np.min(
        np.maximum(np.abs(pts.real[..., None] - c.locations.real), np.abs(pts.imag[..., None] - c.locations.imag)),
        axis=-1,
    ) / h
    clear = dist > 2.5  # no root in the surrounding 5x5 block
    assert clear.mean() > 0.9
    assert np.abs(lap[clear]).max() <= 1e-3


def test_pb_single_sample_is_u_n():
    rect = Rect(-2, 2, -2, 2)
    pb = pb_average_field(BASILICA, 6, 1.0, 1, 4, rect, (17, 17))
    u = u_n_field(PhaseDerivative(BASILICA, 6, 1, complex(pb.lambdas[0])), rect, (17, 17))
    ok = pb.field.mask & u.mask
    assert np.max(np.abs(pb.field.values[ok] - u.values[ok])) <= 1e-12


def test_pb_power_map():
    rect = SQUARE
    pb = pb_average_field(Z2, 8, 1.0, 500, 1, rect, (64, 64))
    g = green_grid(Z2, rect, (64, 64))
    sup, _ = discrepancy_potential(pb.field, g, g, 0.1)
    assert sup <= 0.02


def test_pb_stderr_scaling():
    rect = Rect(-1.5, 1.5, -1.5, 1.5)
    a = pb_average_field(BASILICA, 6, 1.0, 200, 2, rect, (16, 16))
    b = pb_average_field(BASILICA, 6, 1.0, 400, 2, rect, (16, 16))
    ok = a.field.mask & b.field.mask & (a.stderr > 1e-12)
    ratio = np.median(b.stderr[ok] / a.stderr[ok])
    # standard error scales like 1/sqrt(M)
    assert abs(ratio - 1 / math.sqrt(2)) <= 0.1


def test_brolin_power_map():
    s = brolin_sample(Z2, 2, 10, 2000, seed=1)
    assert np.all(np.abs(np.abs(s.locations) - 2 ** (2.0**-10)) <= 1e-9)
    s = brolin_sample(Z2, 2, 20, 10000, seed=2)
    assert angular_discrepancy(s) <= 3 / math.sqrt(10000)
    assert s.total_mass == 1


def test_brolin_rejects_bad_start():
    with pytest.raises(ValueError):
        brolin_sample(Z2, 0, 5, 10, seed=0)  # exceptional point of z^2
    with pytest.raises(ValueError):
        brolin_sample(BASILICA, 100, 5, 10, seed=0)


def test_brolin_cubic():
    f = Poly((0, -1, 0, 1))
    s = brolin_sample(f, 0.5, 12, 500, seed=3)
    g = np.array([green_value(f, z, budget=2000)[0] for z in s.locations])
    assert np.all(g <= 1e-6)


def test_brolin_seed_agreement():
    t = TestFunctionSet.grid()
    N = 100000
    a = brolin_sample(BASILICA, 0, 30, N, seed=1)
    b = brolin_sample(BASILICA, 0, 30, N, seed=2)
    phi_a = t.evaluate(a.locations)
    phi_b = t.evaluate(b.locations)
    diff = np.abs(phi_a.mean(axis=0) - phi_b.mean(axis=0))
    mc = np.sqrt((phi_a.var(axis=0) + phi_b.var(axis=0)) / N)
    assert np.all(diff <= 2 * mc + 1e-12)
    assert np.allclose(weak_pairing(a, b, t), diff, atol=1e-14)


def test_brolin_potential_is_green():
    s = brolin_sample(BASILICA, 0, 30, 20000, seed=5)
    for w in [2.5, 1.5j, -2 + 1j, 0.3 + 1.2j]:
        g, ok = green_value(BASILICA, w)
        assert ok
        vals = np.log(np.abs(w - s.locations))
        err = vals.std() / math.sqrt(vals.size)
        assert abs(vals.mean() - g) <= 4 * err + 1e-3


def test_brolin_deterministic_across_threads():
    a = brolin_sample(BASILICA, 0, 10, 20000, seed=9)
    _parallel.set_threads(3)
    try:
        b = brolin_sample(BASILICA, 0, 10, 20000, seed=9)
    finally:
        _parallel.set_threads(1)
    assert np.array_equal(a.locations, b.locations)


def _field(values, rect=SQUARE):
    v = np.asarray(values, dtype=float)
    ny, nx = v.shape
    return GridField(rect, (nx, ny), v, np.ones_like(v, dtype=bool))


def test_discrepancy_examples():
    rng = np.random.default_rng(0)
    a = _field(rng.random((8, 9)))
    assert discrepancy_potential(a, a, a, -1) == (0.0, 0.0)
    b = _field(a.values + 0.5)
    sup, mean = discrepancy_potential(b, a, a, -1)
    assert math.isclose(sup, 0.5) and math.isclose(mean, 0.5)
    c = _field(rng.random((8, 9)))
    shifted = discrepancy_potential(_field(a.values + 3), _field(c.values + 3), a, 0.2)
    assert np.allclose(shifted, discrepancy_potential(a, c, a, 0.2))
    with pytest.raises(GridMismatch):
        discrepancy_potential(a, _field(a.values, Rect(-1, 1, -1, 1)), a, 0)


def test_weak_pairing_examples():
    t = TestFunctionSet((0j,), (1.0,))
    unit = RootCloud([0j], [1], [0.0], 1)
    assert weak_pairing(unit, unit, t).tolist() == [0.0]
    c = solve_all(PhaseDerivative(Z2, 3, 1, 8))
    assert np.all(weak_pairing(c, c, TestFunctionSet.grid()) == 0)
    with pytest.raises(ValueError):
        TestFunctionSet((0j,), (0.0,))


def test_angular_discrepancy_examples():
    n = 12
    even = RootCloud.uniform(np.exp(2j * np.pi * np.arange(n) / n))
    assert angular_discrepancy(even) <= 1 / n + 1e-15
    same = RootCloud.uniform(np.ones(n))
    assert angular_discrepancy(same) >= 1 - 1 / n
    c = solve_all(PhaseDerivative(Z2, 3, 1, 8))
    assert angular_discrepancy(c) <= 1 / 7 + 1e-12
    with pytest.raises(ValueError):
        angular_discrepancy(RootCloud.uniform([0j]))


def test_grid_field_validation():
    with pytest.raises(ValueError):
        GridField(SQUARE, (2, 1), [1.0, np.nan], [True, True])
    f = GridField(SQUARE, (2, 1), [1.0, np.nan], [True, False])
    assert f.values.shape == (1, 2)
