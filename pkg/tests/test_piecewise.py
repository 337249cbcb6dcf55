import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roefield.piecewise import PiecewisePolynomial, convolve, from_dict, from_text

finite = st.floats(-5, 5, allow_nan=False)


@st.composite
def pps(draw, max_pieces=4, degree=3):
    n = draw(st.integers(1, max_pieces))
    gaps = draw(st.lists(st.floats(0.1, 1.5), min_size=n, max_size=n))
    start = draw(st.floats(-2, 1))
    bp = start + np.concatenate([[0.0], np.cumsum(gaps)])
    coeffs = draw(st.lists(st.lists(finite, min_size=degree + 1, max_size=degree + 1), min_size=n, max_size=n))
    return PiecewisePolynomial(bp, coeffs)


def test_tent_values_and_zero_outside():
    p = PiecewisePolynomial.tent()
    assert p(0.0) == 1.0
    assert p(np.array([-1.0, 1.0, 2.0, -3.0])).tolist() == [0.0, 0.0, 0.0, 0.0]
    assert p(0.5) == pytest.approx(0.5)


def test_breakpoint_convention():
    step = PiecewisePolynomial([0.0, 1.0, 2.0], [[1.0], [3.0]])
    assert step(1.0) == 3.0  # right-limit piece at interior breakpoint
    assert step(2.0) == 3.0  # left limit at the last breakpoint
    assert step(0.0) == 1.0
    assert step(2.0 + 1e-15) == 0.0


def test_rejects_bad_breakpoints():
    with pytest.raises(ValueError):
        PiecewisePolynomial([0.0, 0.0, 1.0], [[1.0], [1.0]])
    with pytest.raises(ValueError):
        PiecewisePolynomial([0.0, 1.0], [[1.0], [1.0]])


def test_global_and_local_agree():
    p = PiecewisePolynomial.from_global([1.0, 2.0, 4.0], [[1.0, 2.0, 3.0], [0.0, -1.0]])
    x = np.array([1.0, 1.5, 2.5, 3.9])
    expected = np.where(x < 2.0, 1 + 2 * x + 3 * x**2, -x)
    assert np.allclose(p(x), expected, atol=1e-13)


@given(pps(), pps(), st.floats(-3, 4))
@settings(max_examples=60, deadline=None)
def test_arithmetic_pointwise(p, q, x):
    assert (p + q)(x) == pytest.approx(p(x) + q(x), abs=1e-8, rel=1e-10)
    assert (p - q)(x) == pytest.approx(p(x) - q(x), abs=1e-8, rel=1e-10)
    assert (p * q)(x) == pytest.approx(p(x) * q(x), abs=1e-6, rel=1e-9)


@given(pps(), st.floats(-2, 2), st.floats(-3, 4))
@settings(max_examples=60, deadline=None)
def test_shift_and_reflect(p, c, x):
    assert p.shift(c)(x) == pytest.approx(p(x - c), abs=1e-8)
    # the reflection takes the other one-sided limit at breakpoints
    if np.min(np.abs(p.breakpoints + x)) > 1e-9:
        assert p.reflect()(x) == pytest.approx(p(-x), abs=1e-8, rel=1e-9)


@given(pps())
@settings(max_examples=40, deadline=None)
def test_integral_matches_gauss(p):
    one = PiecewisePolynomial([p.support[0], p.support[1]], [[1.0]])
    assert p.integral() == pytest.approx(p.inner(one), rel=1e-11, abs=1e-11)


def test_tent_norms():
    p = PiecewisePolynomial.tent()
    assert p.integral() == pytest.approx(1.0, abs=1e-15)
    assert p.l2_norm() == pytest.approx(math.sqrt(2.0 / 3.0), abs=1e-14)
    assert p.lipschitz_constant() == pytest.approx(1.0)
    assert p.sup_norm() >= 1.0
    assert p.l1_bound() >= 1.0


def test_lipschitz_detects_jumps():
    assert PiecewisePolynomial([0.0, 1.0], [[0.0, 1.0]]).lipschitz_constant() == np.inf
    quad = PiecewisePolynomial.from_global([-1.0, 1.0], [[1.0, 0.0, -1.0]])
    assert quad.lipschitz_constant() == pytest.approx(2.0)


def test_convolution_of_indicators_is_tent():
    box = PiecewisePolynomial([-0.5, 0.5], [[1.0]])
    c = convolve(box, box)
    x = np.linspace(-1.2, 1.2, 97)
    assert np.allclose(c(x), PiecewisePolynomial.tent()(x), atol=1e-13)


def test_convolution_degree_and_support():
    p = PiecewisePolynomial.tent()
    q = PiecewisePolynomial.from_global([0.0, 0.5], [[0.0, 0.0, 1.0]])
    c = convolve(p, q)
    assert c.degree == p.degree + q.degree + 1
    assert c.support == pytest.approx((-1.0, 1.5))
    assert convolve(p, PiecewisePolynomial.zero()).is_zero()


def test_convolution_against_fine_grid():
    rng = np.random.default_rng(3)
    p = PiecewisePolynomial([-1.0, 0.0, 0.5], rng.standard_normal((2, 3)))
    q = PiecewisePolynomial([0.0, 0.25, 1.0], rng.standard_normal((2, 2)))
    c = convolve(p, q)
    h = 1e-4
    y = np.arange(-1.0, 0.5, h) + h / 2
    for x in [-0.9, -0.3, 0.1, 0.6, 1.2]:
        ref = np.sum(p(y) * q(x - y)) * h
        assert c(x) == pytest.approx(ref, abs=1e-6)


def test_convolution_integral_is_product():
    rng = np.random.default_rng(5)
    p = PiecewisePolynomial([-1.0, 0.2, 1.0], rng.standard_normal((2, 4)))
    q = PiecewisePolynomial([-0.3, 0.7], rng.standard_normal((1, 4)))
    assert convolve(p, q).integral() == pytest.approx(p.integral() * q.integral(), rel=1e-11)


def test_reduce_degree_certificate():
    p = convolve(PiecewisePolynomial.tent(), PiecewisePolynomial.tent()) * PiecewisePolynomial.tent(0.2, 0.9)
    assert p.degree > 3
    r, err = p.reduce_degree(3, 1e-10)
    assert r.degree <= 3
    assert err <= 1e-10
    x = np.linspace(-0.7, 1.1, 2001)
    assert np.max(np.abs(r(x) - p(x))) <= 1e-10


def test_reduce_degree_noop_for_low_degree():
    p = PiecewisePolynomial.tent()
    r, err = p.reduce_degree(3)
    assert err == 0.0
    assert np.allclose(r(np.linspace(-1, 1, 11)), p(np.linspace(-1, 1, 11)))


def test_text_roundtrip_and_rationals():
    p = from_dict({"breakpoints": ["-1", "0", "1"], "pieces": [["1", "1"], ["1", "-1"]]})
    assert np.allclose(p.coeffs, PiecewisePolynomial.tent().coeffs)
    q = from_dict({"breakpoints": [0, "1/3"], "pieces": [["1/3"]], "basis": "local"})
    assert q(0.1) == pytest.approx(1.0 / 3.0)
    assert q.support[1] == pytest.approx(1.0 / 3.0)
    r = from_text(p.to_text())
    assert r == p
    assert json.loads(p.to_text())["basis"] == "local"


def test_text_rejects_malformed():
    with pytest.raises(ValueError):
        from_dict({"breakpoints": [0, 1]})
    with pytest.raises(ValueError):
        from_dict({"breakpoints": [0, 1], "pieces": [[1, 2, 3, 4, 5]]})
    with pytest.raises(ValueError):
        from_dict({"breakpoints": [0, 1], "pieces": [[1]], "basis": "chebyshev"})
