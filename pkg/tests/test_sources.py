import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from deltascat.sources import PiecewisePolynomial, antiderivative, free_resolvent_1d


def quad_c(f, a, b, points=None):
    kw = dict(points=points, epsabs=1e-14, epsrel=1e-13, limit=200)
    return quad(lambda y: f(y).real, a, b, **kw)[0] + 1j * quad(lambda y: f(y).imag, a, b, **kw)[0]


def test_bump_shape():
    g = PiecewisePolynomial.bump(0.5, 2.0)
    x = np.array([-1.5, -0.5, 0.5, 1.5, 2.5])
    s = (x - 0.5) / 2.0
    assert np.allclose(g(x), np.where(np.abs(s) < 1, (1 - s**2) ** 3, 0.0), atol=1e-14)
    assert g.integral() == pytest.approx(2.0 * 32 / 35, rel=1e-13)


def test_hat_and_indicator():
    h = PiecewisePolynomial.hat(1.0, 0.5)
    assert h(np.array([0.5, 0.75, 1.0, 1.25, 1.5])) == pytest.approx([0, 0.5, 1, 0.5, 0])
    assert h.integral() == pytest.approx(0.5)
    assert PiecewisePolynomial.indicator(-1, 2).integral() == pytest.approx(3.0)


def test_invalid_breaks():
    with pytest.raises(ValueError):
        PiecewisePolynomial((1.0, 0.0), ([1.0],))
    with pytest.raises(ValueError):
        PiecewisePolynomial((0.0, 1.0, 2.0), ([1.0],))


@pytest.mark.parametrize("g", [
    PiecewisePolynomial.bump(-0.4, 0.8),
    PiecewisePolynomial.hat(0.3, 0.7),
    PiecewisePolynomial.indicator(1.0, 2.0),
])
@pytest.mark.parametrize("lam", [1e-3, 0.7, 5.0 - 1.0j, 40.0, 2j])
def test_free_resolvent_against_quadrature(g, lam):
    x = np.array([-2.0, -0.4, 0.35, 1.5, 3.0])
    got = free_resolvent_1d(g, lam, x)
    a, b = g.support
    for xi, v in zip(x, got):
        pts = sorted({p for p in g.breaks[1:-1]} | ({xi} if a < xi < b else set())) or None
        ref = quad_c(lambda y: 0.5j / lam * np.exp(1j * lam * abs(xi - y)) * g(np.array([y]))[0],
                     a, b, points=pts)
        assert abs(v - ref) <= 1e-11 * max(1.0, abs(ref))


@given(st.floats(0.05, 30), st.floats(-2, 2), st.floats(-3, 3))
def test_free_resolvent_solves_ode(re, im, x0):
    lam = complex(re, im)
    g = PiecewisePolynomial.bump(0.0, 1.0)
    h = 1e-3
    x = np.array([x0 - h, x0, x0 + h])
    u = free_resolvent_1d(g, lam, x)
    lhs = -(u[2] - 2 * u[1] + u[0]) / h**2 - lam**2 * u[1]
    assert abs(lhs - g(np.array([x0]))[0]) < 1e-4 * max(1.0, abs(u[1]) * abs(lam) ** 2)


def test_moment_exp():
    g = PiecewisePolynomial.hat(0.0, 1.0)
    s = 0.3 - 1.2j
    ref = quad_c(lambda y: g(np.array([y]))[0] * np.exp(s * (y - 0.2)), -0.5, 0.8, points=[0.0])
    assert g.moment_exp(s, -0.5, 0.8, 0.2) == pytest.approx(ref, abs=1e-13)


def test_inner_with_kinks():
    g = PiecewisePolynomial.indicator(-1.0, 1.0)
    assert g.inner(lambda x: np.exp(-np.abs(x)), kinks=(0.0,)) == pytest.approx(2 * (1 - math.exp(-1)), abs=1e-14)


def test_antiderivative():
    g = PiecewisePolynomial.bump(0.0, 1.0)
    x = np.array([-2.0, -0.5, 0.0, 0.7, 5.0])
    ref = [quad(lambda y: g(np.array([y]))[0], -1, xi)[0] if xi > -1 else 0.0 for xi in x]
    assert np.allclose(antiderivative(g, x), ref, atol=1e-14)
