"""Outgoing free Green's kernels and the Bessel functions behind them.

Kernels (r = |x - y| > 0):

* d = 1: ``i exp(i lam r) / (2 lam)``
* d = 2: ``(i/4) H0(lam r)``
* d = 3: ``exp(i lam r) / (4 pi r)``

The Bessel and Hankel functions of order 0 and 1 are evaluated here for
complex arguments on the principal branch. Three regimes are used:

* ``|z| <= 12``: ascending series for J and Y.
* ``|z| <= 12`` and ``Im z > 4``: trapezoid rule on the integral
  ``H_nu(z) = exp(-i nu pi/2)/(pi i) * int exp(i z cosh t - nu t) dt``.
  Forming H = J + iY from the series loses about ``exp(2 Im z)`` in
  relative accuracy because H is exponentially small there.
* ``|z| > 12``: Hankel asymptotic expansion truncated near its smallest term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BranchError

LAMBDA_MIN = 1e-6
SERIES_RADIUS = 12.0
_INTEGRAL_IMAG = 4.0
_N_SERIES = 48
_N_ASYM = 24
_EULER = 0.57721566490153286061

_T = np.arange(-4.0, 4.0 + 1e-12, 0.05)
_COSH_T = np.cosh(_T)


@dataclass(frozen=True)
class ComplexFrequency:
    """Spectral parameter lam of ``(-Laplace - lam^2)^{-1}``.

    Only the principal sheet (``sheet = 0``) is supported; in even
    dimension the kernels then use the principal Hankel branch.
    """

    value: complex
    dimension: int
    sheet: int = 0
    floor: float = LAMBDA_MIN

    def __post_init__(self):
        v = complex(self.value)
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise BranchError(f"non-finite spectral parameter {v}")
        if abs(v) < self.floor:
            raise BranchError(f"|lambda| = {abs(v):.3g} is below the floor {self.floor:g}")
        if self.dimension not in (1, 2, 3):
            raise BranchError(f"unsupported dimension {self.dimension}")
        if self.sheet != 0:
            raise BranchError("only the principal sheet is implemented")
        object.__setattr__(self, "value", v)

    def __complex__(self) -> complex:
        return self.value


def as_frequency(lam, dimension: int) -> ComplexFrequency:
    if isinstance(lam, ComplexFrequency):
        if lam.dimension != dimension:
            raise BranchError("frequency dimension does not match geometry")
        return lam
    return ComplexFrequency(complex(lam), dimension)


# ------------------------------------------------------------------ series

def _series_jy(z: np.ndarray):
    """J0, J1, Y0, Y1 by ascending series (accurate for |z| <= 12)."""
    q = -0.25 * z * z
    term0 = np.ones_like(z)          # (-z^2/4)^k / (k!)^2
    term1 = np.ones_like(z)          # (-z^2/4)^k / (k! (k+1)!)
    j0 = term0.copy()
    j1s = term1.copy()
    y0s = np.zeros_like(z)
    y1s = (2.0 * -_EULER + 1.0) * term1   # psi(1) + psi(2)
    harm = 0.0
    for k in range(1, _N_SERIES):
        term0 = term0 * q / (k * k)
        term1 = term1 * q / (k * (k + 1))
        harm += 1.0 / k
        j0 += term0
        j1s += term1
        # Y0 needs sum (-1)^{k+1} H_k (z^2/4)^k/(k!)^2 = -sum H_k term0
        y0s -= harm * term0
        y1s += (2.0 * (harm - _EULER) + 1.0 / (k + 1)) * term1
    half = 0.5 * z
    j1 = half * j1s
    logz = np.log(half)
    y0 = (2.0 / np.pi) * ((logz + _EULER) * j0 + y0s)
    y1 = -2.0 / (np.pi * z) + (2.0 / np.pi) * logz * j1 - half * y1s / np.pi
    return j0, j1, y0, y1


def _asym_coeffs(nu: int) -> np.ndarray:
    mu = 4.0 * nu * nu
    a = np.empty(_N_ASYM)
    a[0] = 1.0
    for k in range(1, _N_ASYM):
        a[k] = a[k - 1] * (mu - (2 * k - 1) ** 2) / (k * 8.0)
    return a


_A0 = _asym_coeffs(0)
_A1 = _asym_coeffs(1)


def _asym_pq(nu: int, z: np.ndarray):
    """P and Q of the Hankel expansion, ``H = sqrt(2/(pi z)) e^{i chi} (P + iQ)``."""
    a = _A0 if nu == 0 else _A1
    inv = 1.0 / z
    p = np.zeros_like(z)
    q = np.zeros_like(z)
    pw = np.ones_like(z)
    for k in range(_N_ASYM):
        t = a[k] * pw
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2 == 0:
            p += sign * t
        else:
            q += sign * t
        pw = pw * inv
    return p, q


def _asym_h12_right(nu: int, w: np.ndarray):
    """H^{(1)} and H^{(2)} of order nu for Re w >= 0."""
    p, q = _asym_pq(nu, w)
    chi = w - (0.5 * nu + 0.25) * np.pi
    amp = math.sqrt(2.0 / np.pi) / np.sqrt(w)
    return amp * np.exp(1j * chi) * (p + 1j * q), amp * np.exp(-1j * chi) * (p - 1j * q)


def _asym_all(nu: int, z: np.ndarray):
    """(H1, J, Y) of order nu from the large-argument expansion.

    The expansion is used directly in the right half plane. The left half
    plane is reached through ``z = w e^{+-i pi}`` with ``Re w > 0``, using
    ``J_n(z) = (-1)^n J_n(w)`` and ``Y_n(z) = (-1)^n (Y_n(w) +- 2i J_n(w))``.
    """
    left = z.real < 0
    w = np.where(left, -z, z)
    h1, h2 = _asym_h12_right(nu, w)
    j = 0.5 * (h1 + h2)
    y = (h1 - h2) / 2j
    s = -1.0 if nu % 2 else 1.0
    upper = left & (z.imag >= 0)
    lower = left & (z.imag < 0)
    H = h1.copy()
    J = j.copy()
    Y = y.copy()
    H[upper] = -s * h2[upper]
    H[lower] = s * (2.0 * h1[lower] + h2[lower])
    J[left] = s * j[left]
    Y[upper] = s * (y[upper] + 2j * j[upper])
    Y[lower] = s * (y[lower] - 2j * j[lower])
    return H, J, Y


def _asym_h(nu: int, z: np.ndarray) -> np.ndarray:
    return _asym_all(nu, z)[0]


def _asym_jy(nu: int, z: np.ndarray):
    _, j, y = _asym_all(nu, z)
    return j, y


def _integral_h(nu: int, z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    step = _T[1] - _T[0]
    for s in range(0, z.size, 4096):
        zz = z[s:s + 4096]
        f = np.exp(1j * zz[:, None] * _COSH_T[None, :] - nu * _T[None, :])
        out[s:s + 4096] = f.sum(axis=1) * step
    return np.exp(-0.5j * nu * np.pi) / (np.pi * 1j) * out


def _prepare(z):
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise ZeroDivisionError("Bessel functions of the second kind are singular at z = 0")
    return z


def bessel_jy(z):
    """Return ``(J0, J1, Y0, Y1)`` at complex ``z`` (principal branch).

    Parameters
    ----------
    z : array_like of complex
        Nonzero arguments with ``-pi < arg z <= pi``.
    """
    z = _prepare(z)
    shape = z.shape
    z = z.ravel()
    out = [np.empty_like(z) for _ in range(4)]
    small = np.abs(z) <= SERIES_RADIUS
    if small.any():
        for o, v in zip(out, _series_jy(z[small])):
            o[small] = v
    big = ~small
    if big.any():
        zb = z[big]
        j0, y0 = _asym_jy(0, zb)
        j1, y1 = _asym_jy(1, zb)
        out[0][big], out[1][big], out[2][big], out[3][big] = j0, j1, y0, y1
    return tuple(o.reshape(shape) for o in out)


def bessel_j0(z):
    """J0 alone; entire, so no branch issues."""
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    z = z.ravel()
    out = np.ones_like(z)
    nz = z != 0
    if nz.any():
        out[nz] = bessel_jy(z[nz])[0]
    return out.reshape(shape)


def hankel1_pair(z):
    """Return ``(H0, H1)`` of the first kind at complex ``z``."""
    z = _prepare(z)
    shape = z.shape
    z = z.ravel()
    h0 = np.empty_like(z)
    h1 = np.empty_like(z)
    a = np.abs(z)
    integ = (a <= SERIES_RADIUS) & (z.imag > _INTEGRAL_IMAG)
    ser = (a <= SERIES_RADIUS) & ~integ
    big = a > SERIES_RADIUS
    if ser.any():
        j0, j1, y0, y1 = _series_jy(z[ser])
        h0[ser] = j0 + 1j * y0
        h1[ser] = j1 + 1j * y1
    if integ.any():
        h0[integ] = _integral_h(0, z[integ])
        h1[integ] = _integral_h(1, z[integ])
    if big.any():
        h0[big] = _asym_h(0, z[big])
        h1[big] = _asym_h(1, z[big])
    return h0.reshape(shape), h1.reshape(shape)


def hankel1(order: int, z):
    """Hankel function of the first kind ``H^{(1)}_order(z)`` for order 0 or 1.

    Raises
    ------
    ZeroDivisionError
        If any argument is exactly zero.

    Examples
    --------
    >>> complex(hankel1(0, 1.0))  # doctest: +ELLIPSIS
    (0.765197686557966...+0.088256964215676...j)
    """
    if order not in (0, 1):
        raise ValueError("only orders 0 and 1 are implemented")
    h0, h1 = hankel1_pair(z)
    out = h0 if order == 0 else h1
    return out[()] if out.ndim == 0 else out


def hankel1_series(order: int, z):
    """Series-regime value, exposed for overlap-band diagnostics."""
    j0, j1, y0, y1 = _series_jy(_prepare(z).ravel())
    return (j0 + 1j * y0) if order == 0 else (j1 + 1j * y1)


def hankel1_asymptotic(order: int, z):
    """Asymptotic-regime value, exposed for overlap-band diagnostics."""
    return _asym_h(order, _prepare(z).ravel())


# ----------------------------------------------------------------- kernels

def green_kernel(d: int, lam: complex, r) -> np.ndarray:
    """Vectorized outgoing kernel ``G0(lam, r)`` for ``r > 0`` (no checks)."""
    lam = complex(lam)
    r = np.asarray(r, dtype=float)
    if d == 1:
        return 0.5j / lam * np.exp(1j * lam * r)
    if d == 2:
        return 0.25j * hankel1_pair(lam * r)[0]
    if d == 3:
        return np.exp(1j * lam * r) / (4.0 * np.pi * r)
    raise ValueError(f"unsupported dimension {d}")


def eval_green(d: int, lam, r):
    """Outgoing free Green's kernel at distance ``r``.

    Parameters
    ----------
    d : {1, 2, 3}
    lam : complex or ComplexFrequency
    r : float or array_like
        Distances, strictly positive.

    Returns
    -------
    complex or ndarray of complex
    """
    lam = as_frequency(lam, d).value
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise ValueError("distance must be positive; the diagonal is handled by the assembler")
    out = green_kernel(d, lam, r)
    return out[()] if out.ndim == 0 else out


def sheet_jump(d: int, lam: float, r):
    """``G0(e^{i pi} lam, r) - G0(lam, r)`` for real ``lam != 0``.

    Equals ``-(i/2) (2 pi)^{1-d} lam^{d-2} * int_{S^{d-1}} exp(i lam r w_1) dw``,
    which for d = 1, 2, 3 is ``-i cos(lam r)/lam``, ``-(i/2) J0(lam r)`` and
    ``-i sin(lam r)/(2 pi r)``.
    """
    lam = float(lam)
    if lam == 0:
        raise BranchError("sheet jump is defined for real lam != 0")
    r = np.asarray(r, dtype=float)
    if d == 1:
        return -1j * np.cos(lam * r) / lam
    if d == 2:
        return -0.5j * bessel_j0(lam * r)
    if d == 3:
        return -1j * np.sin(lam * r) / (2.0 * np.pi * r)
    raise ValueError(f"unsupported dimension {d}")


# ------------------------------------------------------------ bound checks

@dataclass
class KernelBoundReport:
    """Ratios of |G0| to the model bounds in the near and far regimes.

    ``c_near`` and ``c_far`` are the smallest constants that make the
    bounds hold on the sampled radii.
    """

    dimension: int
    lam: complex
    radii: np.ndarray
    near_ratio: np.ndarray
    far_ratio: np.ndarray
    c_near: float
    c_far: float

    @property
    def holds(self) -> bool:
        return bool(np.isfinite(self.c_near) and np.isfinite(self.c_far))


def near_model(d: int, lam: complex, r):
    """Model bound for ``r <= 1/|lam|``; in d = 2 the log singularity."""
    r = np.asarray(r, dtype=float)
    if d == 1:
        return far_model(d, lam, r)
    if d == 2:
        return 1.0 + np.abs(np.log(abs(lam) * r))
    return r ** (2.0 - d)


def far_model(d: int, lam: complex, r):
    """``exp(-Im lam r) |lam|^{(d-3)/2} r^{(1-d)/2}``."""
    lam = complex(lam)
    r = np.asarray(r, dtype=float)
    return np.exp(-lam.imag * r) * abs(lam) ** ((d - 3) / 2.0) * r ** ((1.0 - d) / 2.0)


def verify_kernel_bounds(d: int, lam, samples=None, d_gamma: float = 1.0,
                         n_samples: int = 200) -> KernelBoundReport:
    """Sample |G0| against the near/far model bounds.

    Parameters
    ----------
    samples : array_like, optional
        Radii to test. Defaults to a log-spaced grid on
        ``[0.01/|lam|, 10 d_gamma]``.
    """
    lam = as_frequency(lam, d).value
    if samples is None:
        samples = np.geomspace(0.01 / abs(lam), 10.0 * d_gamma, n_samples)
    r = np.asarray(samples, dtype=float)
    g = np.abs(green_kernel(d, lam, r))
    near = r <= 1.0 / abs(lam)
    near_ratio = g[near] / near_model(d, lam, r[near])
    far_ratio = g[~near] / far_model(d, lam, r[~near])
    return KernelBoundReport(
        dimension=d, lam=lam, radii=r,
        near_ratio=near_ratio, far_ratio=far_ratio,
        c_near=float(near_ratio.max()) if near_ratio.size else 0.0,
        c_far=float(far_ratio.max()) if far_ratio.size else 0.0,
    )
