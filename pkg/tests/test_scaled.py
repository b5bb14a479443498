import math

import numpy as np
from hypothesis import assume, given
from hypothesis import strategies as st

from dynequi.scaled import ScaledComplex

finite = st.floats(min_value=-1e150, max_value=1e150, allow_nan=False, allow_infinity=False)
cplx = st.builds(complex, finite, finite)


def close(a, b, rel=2.0**-50):
    return abs(a - b) <= rel * max(abs(a), abs(b)) + 1e-300


@given(cplx)
def test_round_trip(z):
    s = ScaledComplex(np.array([z]))
    assert close(complex(s.to_complex()[0]), z)
    if z != 0:
        assert 0.5 <= abs(s.m[0]) < 2


@given(cplx, cplx)
def test_arithmetic_matches_complex(a, b):
    with np.errstate(all="ignore"):
        ref_q = a / b if b != 0 else 0
    assume(abs(a * b) < 1e300 and abs(ref_q) < 1e300)
    sa, sb = ScaledComplex(np.array([a])), ScaledComplex(np.array([b]))
    assert close(complex((sa * sb).to_complex()[0]), a * b, 1e-14)
    s = complex((sa + sb).to_complex()[0])
    assert abs(s - (a + b)) <= 1e-15 * (abs(a) + abs(b)) + 1e-300
    if b != 0:
        q = complex((sa / sb).to_complex()[0])
        assert abs(q - ref_q) <= 1e-14 * abs(ref_q) + 1e-300


def test_huge_values_do_not_overflow():
    s = ScaledComplex(np.array([3.0 + 4.0j]))
    for _ in range(40):  # (3+4i)^(2^40)
        s = s.square()
    expected = 2.0**40 * math.log(5.0)
    assert math.isfinite(s.log_abs()[0])
    assert abs(s.log_abs()[0] - expected) <= 1e-9 * expected


def test_zero_handling():
    z = ScaledComplex.zeros(3)
    assert np.all(z.is_zero())
    assert np.all(np.isneginf(z.log_abs()))
    one = ScaledComplex.ones(3)
    assert np.allclose((one + z).to_complex(), 1)
    assert np.allclose((one - one).to_complex(), 0)


def test_subtraction_far_apart_scales():
    big = ScaledComplex(np.array([1.0]), np.array([3000]))
    small = ScaledComplex(np.array([1.0]))
    d = big - small
    assert d.log_abs()[0] == big.log_abs()[0]


@given(st.floats(min_value=-1e6, max_value=1e6), st.floats(min_value=-math.pi, max_value=math.pi))
def test_from_polar_log(la, th):
    s = ScaledComplex.from_polar_log(np.array([la]), np.array([th]))
    assert abs(s.log_abs()[0] - la) <= 1e-9 * (1 + abs(la))
    assert abs(np.angle(np.exp(1j * (s.angle()[0] - th)))) <= 1e-9
