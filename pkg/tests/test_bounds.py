from fractions import Fraction as Fr

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from perisolve.bounds import (BoundQuadruple, PolyFunction, SmoothFunction, band_membership, count_roots,
                              real_roots_in, shift_lower, shift_upper, sturm_sequence, sup_norm, sup_norm_info)
from perisolve.cases import example_case, vdp_case


def P(*c, T=1.0):
    return PolyFunction(c, T)


def sympy_sup(coeffs, T=1):
    """Exact max |p| over [0, T] from sympy's real roots of p'."""
    t = sp.symbols("t")
    p = sum(sp.Rational(str(c)) * t**k for k, c in enumerate(coeffs))
    pts = [sp.Integer(0), sp.Rational(T)]
    dp = sp.diff(p, t)
    if dp != 0:
        pts += [r for r in sp.Poly(dp, t).real_roots() if 0 < r < T]
    return max(abs(p.subs(t, x)) for x in pts)


@pytest.mark.parametrize("coeffs, expected", [
    ((1, 0, 2, -2), Fr(35, 27)),
    ((1, -3, 3), Fr(1)),
    ((0,), Fr(0)),
    ((-1, 1, -1), Fr(1)),
    ((Fr(-3, 4), 1, -1), Fr(3, 4)),
])
def test_sup_norm_known(coeffs, expected):
    v = sup_norm(P(*coeffs))
    assert v == expected
    assert sympy_sup(coeffs) == sp.Rational(expected.numerator, expected.denominator)


def test_sup_norm_is_exact_fraction_for_rational_input():
    assert isinstance(sup_norm(P(1, 0, 2, -2)), Fr)


def test_example_shifts_exact():
    q = example_case().bounds
    assert q.alpha1_0.coefficients == (Fr(-8, 27), 0, 2, -2)
    assert q.alpha2_0.coefficients == (Fr(-1, 2), 2, -2)
    assert q.beta1_0.coefficients == (Fr(12, 5), 0, -2, 2)
    assert q.beta2_0.coefficients == (2, -3, 3)


def test_vdp_upper_shifts_exact():
    q = vdp_case().bounds
    assert q.beta1_0.coefficients == (2, 0, Fr(-1, 2), Fr(1, 2))
    assert q.beta2_0.coefficients == (2, 0, -1, 1)


def test_vdp_lower_shifts_follow_the_definition():
    q = vdp_case().bounds
    assert q.alpha1_0.coefficients == (-2, 1, -1)
    assert q.alpha2_0.coefficients == (Fr(-3, 2), 1, -1)


def test_zero_shifts():
    assert shift_lower(P(0)).coefficients == (0,)
    assert shift_upper(P(0)).coefficients == (0,)


def test_witness_smallest_t_on_tie():
    # |1 - 3t + 3t^2| attains 1 at t=0 and t=1
    info = sup_norm_info(P(1, -3, 3))
    assert info.witness_t == 0.0 and info.method == "sturm"


def test_sturm_counts_roots():
    # (t - 1/4)(t - 1/2)(t - 3/4)
    p = [Fr(-3, 32), Fr(11, 16), Fr(-3, 2), Fr(1)]
    seq = sturm_sequence(p)
    assert count_roots(seq, 0, 1) == 3
    assert count_roots(seq, 0.3, 1) == 2
    np.testing.assert_allclose(real_roots_in(p, 0, 1), [0.25, 0.5, 0.75], atol=1e-12)


def test_double_root_located():
    # derivative of (t - 1/3)^3 has a double root at 1/3
    roots = real_roots_in([Fr(1, 9), Fr(-2, 3), Fr(1)], 0, 1)
    assert len(roots) == 1 and abs(roots[0] - 1 / 3) < 1e-9


def test_degree_cap_and_validation():
    with pytest.raises(ValueError):
        PolyFunction(tuple(range(1, 19)))
    with pytest.raises(ValueError):
        PolyFunction((1.0, float("nan")))
    with pytest.raises(ValueError):
        PolyFunction((1,), T=0)


def test_membership():
    q = example_case().bounds
    assert band_membership(q, 0, 0, 0).inside
    m = band_membership(q, 0, 10, 0)
    assert not m.inside and m.violations == (("z", "above", 2.4),)
    m = band_membership(q, 1, -5, 0)
    assert m.violations[0][:2] == ("z", "below")
    assert m.violations[0][2] == pytest.approx(-8 / 27, abs=1e-15)
    with pytest.raises(ValueError):
        band_membership(q, 1.5, 0, 0)


def test_smooth_function_grid_fallback():
    f = SmoothFunction(lambda t: np.sin(2 * np.pi * t), lambda t: 0 * t, lambda t: 0 * t)
    assert sup_norm(f) == pytest.approx(1.0, abs=1e-12)
    lo = shift_lower(f)
    assert lo(0.25) == pytest.approx(0.0, abs=1e-12)


def test_pretty():
    assert P(Fr(-8, 27), 0, 2, -2).pretty() == "-8/27 + 2*t^2 - 2*t^3"
    assert P(0).pretty() == "0"


coef = st.fractions(min_value=-10, max_value=10, max_denominator=20)


@settings(max_examples=150, deadline=None)
@given(st.lists(coef, min_size=1, max_size=6))
def test_sup_norm_matches_sympy_and_grid(coeffs):
    p = PolyFunction(tuple(coeffs))
    v = sup_norm(p)
    assert abs(float(v) - float(sympy_sup(coeffs))) <= 1e-12 * max(1.0, float(v))
    grid = np.abs(p(np.linspace(0, 1, 10_000)))
    assert grid.max() <= float(v) + 1e-10


@settings(max_examples=150, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=6))
def test_shift_signs_and_constant_difference(coeffs):
    p = PolyFunction(tuple(coeffs))
    t = np.linspace(0, 1, 2001)
    lo, hi = shift_lower(p), shift_upper(p)
    scale = 1e-12 * max(1.0, float(sup_norm(p)))
    assert np.all(lo(t) <= scale)
    assert np.all(hi(t) >= -scale)
    assert lo.coefficients[1:] == p.coefficients[1:] == hi.coefficients[1:]


@settings(max_examples=100, deadline=None)
@given(st.lists(coef, min_size=1, max_size=5))
def test_shift_round_trip_exact(coeffs):
    p = PolyFunction(tuple(coeffs))
    v = sup_norm(p)
    back = shift_lower(p).shifted(v).coefficients
    assert back[1:] == p.coefficients[1:]
    if isinstance(v, Fr):
        assert back[0] == p.coefficients[0]
    else:
        # irrational maximum: float norm, one rounding in each direction
        assert abs(back[0] - float(p.coefficients[0])) <= 4e-16 * max(1.0, float(v))


@settings(max_examples=50, deadline=None)
@given(st.lists(coef, min_size=1, max_size=4), st.lists(coef, min_size=1, max_size=4))
def test_quadruple_strips_contain_zero(a, b):
    q = BoundQuadruple(PolyFunction(tuple(a)), PolyFunction(tuple(b)),
                       PolyFunction(tuple(b)), PolyFunction(tuple(a)))
    t = np.linspace(0, 1, 501)
    for lo, hi in ((q.alpha1_0, q.beta1_0), (q.alpha2_0, q.beta2_0)):
        assert np.all(lo(t) <= 1e-12) and np.all(hi(t) >= -1e-12)
