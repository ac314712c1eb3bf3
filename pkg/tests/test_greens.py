import math

import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given
from hypothesis import strategies as st

from deltascat.errors import BranchError
from deltascat.greens import (ComplexFrequency, bessel_jy, eval_green, green_kernel, hankel1,
                              hankel1_asymptotic, hankel1_series, sheet_jump,
                              verify_kernel_bounds)


def series_j0_y0(x, terms=80):
    """Independent oracle: ascending series for J0 and Y0 at real x > 0."""
    k = np.arange(terms)
    q = (-(x * x) / 4.0) ** k / sp.factorial(k) ** 2
    j0 = q.sum()
    harmonic = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, terms))])
    y0 = 2 / np.pi * (np.log(x / 2) + np.euler_gamma) * j0 - 2 / np.pi * np.sum(
        (-1.0) ** k * harmonic * ((x * x) / 4.0) ** k / sp.factorial(k) ** 2)
    return j0, y0


@pytest.mark.parametrize("x, expected", [
    (1.0, 0.7651976866 + 0.0882569642j),
    (10.0, -0.2459357645 + 0.0556711673j),
])
def test_hankel_reference_values(x, expected):
    assert abs(hankel1(0, x) - expected) < 1e-9


@pytest.mark.parametrize("x", [0.5, 1.0, 3.0, 10.0])
def test_hankel_matches_series_oracle(x):
    j0, y0 = series_j0_y0(x)
    assert abs(hankel1(0, x) - (j0 + 1j * y0)) < 1e-12 * max(1.0, abs(j0 + 1j * y0))


def test_wronskian():
    z = 2 + 1j
    j0, j1, y0, y1 = (complex(v) for v in bessel_jy(z))
    # J0' = -J1, Y0' = -Y1
    w = j0 * (-y1) - (-j1) * y0
    assert abs(w - 2 / (np.pi * z)) / abs(2 / (np.pi * z)) < 1e-9


@given(st.floats(0.05, 60.0), st.floats(-math.pi + 1e-3, math.pi))
def test_hankel_against_scipy(mod, arg):
    z = mod * np.exp(1j * arg)
    for n in (0, 1):
        ref = sp.hankel1(n, z)
        if not np.isfinite(ref) or abs(ref) < 1e-250 or abs(ref) > 1e250:
            continue
        assert abs(hankel1(n, z) - ref) <= 1e-9 * abs(ref)


@pytest.mark.parametrize("mod", [10.0, 11.0, 12.0, 13.0, 14.0])
@pytest.mark.parametrize("im", [-2.0, -1.0, 0.0, 1.0, 2.0])
def test_overlap_band(mod, im):
    z = complex(math.sqrt(mod**2 - im**2), im)
    for n in (0, 1):
        a, b = complex(hankel1_series(n, z)[0]), complex(hankel1_asymptotic(n, z)[0])
        assert abs(a - b) < 1e-9 * abs(b)


def test_hankel_zero_raises():
    with pytest.raises(ZeroDivisionError):
        hankel1(0, 0.0)


@pytest.mark.parametrize("d, lam, r, expected", [
    (1, 2.0, 1e-14, 0.25j),
    (3, 1j, 1.0, math.exp(-1) / (4 * math.pi)),
    (2, 1.0, 1.0, -0.0220642 + 0.1912994j),
])
def test_eval_green_examples(d, lam, r, expected):
    assert abs(eval_green(d, lam, r) - expected) < 1e-7


@pytest.mark.parametrize("d", [1, 2, 3])
def test_eval_green_rejects_nonpositive_r(d):
    with pytest.raises(ValueError):
        eval_green(d, 1.0, 0.0)
    with pytest.raises(ValueError):
        eval_green(d, 1.0, [0.5, -1.0])


def test_frequency_floor_and_sheet():
    with pytest.raises(BranchError):
        ComplexFrequency(1e-8, 2)
    with pytest.raises(BranchError):
        ComplexFrequency(1.0, 2, sheet=1)
    with pytest.raises(BranchError):
        eval_green(2, 1e-9, 1.0)
    assert ComplexFrequency(1e-8, 2, floor=1e-9).value == 1e-8


def test_kernel_bound_examples():
    rep = verify_kernel_bounds(3, 10.0, samples=[2.0])
    assert rep.far_ratio[0] == pytest.approx(1 / (4 * math.pi), rel=1e-13)
    lam = 5 - 2j
    assert abs(eval_green(1, lam, 1.0)) == pytest.approx(math.e**2 / (2 * math.sqrt(29)), rel=1e-13)
    assert abs(eval_green(2, 50.0, 1.0)) == pytest.approx(0.25 * math.sqrt(2 / (math.pi * 50)), rel=0.02)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("lam", [1.0, 10.0, 40.0, 10 - 1j, 5 + 2j, 3j])
def test_kernel_bounds_hold_with_moderate_constants(d, lam):
    rep = verify_kernel_bounds(d, lam, d_gamma=2.0)
    assert rep.holds
    assert rep.c_near < 5.0 and rep.c_far < 5.0


@given(st.floats(0.1, 50), st.floats(-3, 3), st.floats(0.01, 10))
def test_reality_symmetry_odd_d(re, im, r):
    lam = complex(re, im)
    for d in (1, 3):
        a = eval_green(d, lam, r)
        b = np.conj(eval_green(d, -np.conj(lam), r))
        assert abs(a - b) <= 1e-13 * max(abs(a), 1e-300)


@pytest.mark.parametrize("lam", [1.0, 4.0 - 0.5j, 2j])
def test_radial_pde_d3(lam):
    r = np.linspace(0.5, 3.0, 11)
    errs = []
    for h in (1e-2, 5e-3):
        u = lambda s: s * green_kernel(3, lam, s)
        d2 = (u(r + h) - 2 * u(r) + u(r - h)) / h**2
        errs.append(np.max(np.abs(-d2 - lam**2 * u(r))) / np.max(np.abs(lam**2 * u(r))))
    assert errs[1] < 1e-4
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_sheet_jump(d):
    lam, r = 2.3, np.array([0.4, 1.7])
    # the kernel continued once around the origin, built from scipy
    continued = {1: 0.5j / (-lam) * np.exp(-1j * lam * r),
                 2: -0.25j * sp.hankel2(0, lam * r),
                 3: np.exp(-1j * lam * r) / (4 * np.pi * r)}[d]
    assert np.allclose(sheet_jump(d, lam, r), continued - green_kernel(d, lam, r), atol=1e-13)
