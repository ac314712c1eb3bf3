"""Compactly supported piecewise-polynomial data on the line."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P


@dataclass(frozen=True)
class PiecewisePolynomial:
    """``g(x) = sum_k c[i][k] x^k`` on ``[breaks[i], breaks[i+1])``, zero elsewhere.

    Coefficients are in the global variable x (not shifted per piece),
    lowest degree first.
    """

    breaks: tuple
    coeffs: tuple

    def __post_init__(self):
        b = tuple(float(v) for v in self.breaks)
        if len(b) < 2 or any(b1 <= b0 for b0, b1 in zip(b, b[1:])):
            raise ValueError("breakpoints must be strictly increasing, at least two")
        c = tuple(np.atleast_1d(np.asarray(ci, dtype=float)) for ci in self.coeffs)
        if len(c) != len(b) - 1:
            raise ValueError("need one coefficient array per interval")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def indicator(cls, a: float, b: float) -> "PiecewisePolynomial":
        return cls((a, b), ([1.0],))

    @classmethod
    def bump(cls, center: float = 0.0, width: float = 1.0) -> "PiecewisePolynomial":
        """``(1 - ((x - center)/width)^2)^3`` on ``|x - center| < width``: a C^2 polynomial bump."""
        base = P.polypow([1.0, 0.0, -1.0], 3)
        # substitute s = (x - center)/width
        lin = np.array([-center / width, 1.0 / width])
        coeffs = np.zeros(1)
        for k, b in enumerate(base):
            coeffs = P.polyadd(coeffs, b * P.polypow(lin, k))
        return cls((center - width, center + width), (coeffs,))

    @classmethod
    def hat(cls, center: float = 0.0, width: float = 1.0) -> "PiecewisePolynomial":
        """Continuous tent of height 1 supported on ``[center - width, center + width]``."""
        a, m, b = center - width, center, center + width
        return cls((a, m, b), ([-a / width, 1.0 / width], [b / width, -1.0 / width]))

    @property
    def support(self) -> tuple:
        return self.breaks[0], self.breaks[-1]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for (a, b), c in zip(self.intervals(), self.coeffs):
            m = (x >= a) & (x < b)
            out[m] = P.polyval(x[m], c)
        return out

    def intervals(self):
        return list(zip(self.breaks[:-1], self.breaks[1:]))

    def integral(self) -> float:
        tot = 0.0
        for (a, b), c in zip(self.intervals(), self.coeffs):
            ci = P.polyint(c)
            tot += P.polyval(b, ci) - P.polyval(a, ci)
        return float(tot)

    def moment_exp(self, s: complex, a: float, b: float, x0: float = 0.0) -> complex:
        """``int_a^b g(y) exp(s (y - x0)) dy`` over a sub-interval, in closed form.

        Repeated integration by parts gives the antiderivative
        ``exp(s (y - x0)) * sum_k (-1)^k g^(k)(y) / s^(k+1)`` on each piece.
        """
        total = 0j
        for (lo, hi), c in zip(self.intervals(), self.coeffs):
            lo2, hi2 = max(lo, a), min(hi, b)
            if hi2 <= lo2:
                continue
            total += _exp_poly_antideriv(c, s, hi2, x0) - _exp_poly_antideriv(c, s, lo2, x0)
        return total

    def inner(self, f, n: int = 64, kinks=()) -> complex:
        """``int g(x) f(x) dx`` by Gauss-Legendre on each piece.

        ``kinks`` lists points where ``f`` is not smooth; pieces are split
        there so the rule stays spectrally accurate.
        """
        gx, gw = np.polynomial.legendre.leggauss(n)
        tot = 0j
        for (a, b), c in zip(self.intervals(), self.coeffs):
            cuts = [a] + sorted(k for k in kinks if a < k < b) + [b]
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx
                tot += np.sum(gw * 0.5 * (hi - lo) * P.polyval(x, c) * f(x))
        return tot


def _exp_poly_antideriv(c, s: complex, y, x0):
    """``exp(s (y - x0)) * sum_k (-1)^k p^(k)(y) / s^(k+1)``, vectorized in y and x0."""
    y = np.asarray(y, dtype=float)
    acc = np.zeros(np.broadcast(y, x0).shape, dtype=complex)
    deriv = np.asarray(c, dtype=float)
    sk = s
    sign = 1.0
    while deriv.size and np.any(deriv):
        acc = acc + sign * P.polyval(y, deriv) / sk
        deriv = P.polyder(deriv)
        sk = sk * s
        sign = -sign
    return np.exp(s * (y - x0)) * acc


def free_resolvent_1d(g: PiecewisePolynomial, lam: complex, x) -> np.ndarray:
    """``(R0(lam) g)(x) = int i exp(i lam |x - y|) / (2 lam) g(y) dy``.

    Each piece is split at x; the part left of x carries ``exp(i lam (x - y))``
    and the part right of x carries ``exp(i lam (y - x))``. Pieces with
    ``|lam| width >= 2`` use the closed-form antiderivative. On shorter
    pieces its terms ``p^(k) / s^(k+1)`` cancel badly, so Gauss-Legendre
    on each side of x is used instead.
    """
    lam = complex(lam)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    total = np.zeros(x.shape, dtype=complex)
    for (lo, hi), c in zip(g.intervals(), g.coeffs):
        up = np.clip(x, lo, hi)
        if abs(lam) * (hi - lo) < 2.0:
            total += _gl_side(c, lam, x, lo, up) + _gl_side(c, lam, x, up, hi)
            continue
        # left part: y in [lo, min(x, hi)] when x > lo
        m = x > lo
        if m.any():
            total[m] += (_exp_poly_antideriv(c, -1j * lam, up[m], x[m])
                         - _exp_poly_antideriv(c, -1j * lam, lo, x[m]))
        m = x < hi
        if m.any():
            total[m] += (_exp_poly_antideriv(c, 1j * lam, hi, x[m])
                         - _exp_poly_antideriv(c, 1j * lam, up[m], x[m]))
    return 0.5j / lam * total


_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)


def _gl_side(c, lam, x, a, b):
    """``int_a^b p(y) exp(i lam |x - y|) dy`` with per-point limits, on one side of x."""
    a = np.broadcast_to(a, x.shape)
    b = np.broadcast_to(b, x.shape)
    half = 0.5 * (b - a)
    y = 0.5 * (a + b)[:, None] + half[:, None] * _GL_X[None, :]
    f = P.polyval(y, c) * np.exp(1j * lam * np.abs(x[:, None] - y))
    return half * (f @ _GL_W)


def antiderivative(g: PiecewisePolynomial, x) -> np.ndarray:
    """``int_{-inf}^x g(y) dy``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    for (lo, hi), c in zip(g.intervals(), g.coeffs):
        ci = P.polyint(c)
        up = np.clip(x, lo, hi)
        out += P.polyval(up, ci) - P.polyval(lo, ci)
    return out
