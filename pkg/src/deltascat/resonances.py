"""Resonances of ``-Laplace + V (x) delta_Gamma`` and resolvent residues.

Resonances are the values lam where ``T(lam) = I + V A(lam)`` is singular,
with ``A`` the assembled single layer matrix on node values. Two independent
routes locate them:

* the determinant route: argument-principle counts of ``det T`` along
  contours, and Newton iteration on ``det T``;
* the contour-moment route (Beyn): trapezoid moments of ``T(lam)^{-1}``
  against random probes, reduced by a block Hankel SVD.

In d = 1 ``A`` has a simple pole at lam = 0, so ``det T`` has a pole of
order at most N there. Counts over contours enclosing the origin subtract
the winding on a small circle around 0; the origin itself is never reported.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (ContourError, ConvergenceError, IllConditionedError, InconsistencyError,
                     PoleTooCloseError, ProbeRankError)
from .geometry import GammaDiscretization
from .greens import LAMBDA_MIN, green_kernel
from .layer import PotentialSpec, assemble
from .sources import PiecewisePolynomial, free_resolvent_1d

RESONANCE_COLUMNS = ("re", "im", "multiplicity", "residual", "method")
SPLIT_FRACTION = 0.4871
PROBE_SEED = 20240607


# ---------------------------------------------------------------- contours

@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("circle radius must be positive")
        object.__setattr__(self, "center", complex(self.center))

    def point(self, s):
        """Point at parameter ``s`` in [0, 1), counter-clockwise."""
        return self.center + self.radius * np.exp(2j * np.pi * np.asarray(s, dtype=float))

    def derivative(self, s):
        return 2j * np.pi * self.radius * np.exp(2j * np.pi * np.asarray(s, dtype=float))

    def contains(self, z) -> np.ndarray:
        return np.abs(np.asarray(z) - self.center) < self.radius

    def initial_params(self, n: int, density: float = 0.0) -> np.ndarray:
        n = max(n, int(math.ceil(2 * math.pi * self.radius * density)))
        return np.arange(n) / n

    @property
    def scale(self) -> float:
        return self.radius

    def bounding(self) -> "Ellipse":
        return Ellipse(self.center, self.radius, self.radius)

    def describe(self) -> str:
        return f"circle(center={self.center}, radius={self.radius})"


@dataclass(frozen=True)
class Ellipse:
    center: complex
    a: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))

    def point(self, s):
        th = 2 * np.pi * np.asarray(s, dtype=float)
        return self.center + self.a * np.cos(th) + 1j * self.b * np.sin(th)

    def derivative(self, s):
        th = 2 * np.pi * np.asarray(s, dtype=float)
        return 2 * np.pi * (-self.a * np.sin(th) + 1j * self.b * np.cos(th))

    def contains(self, z) -> np.ndarray:
        w = np.asarray(z) - self.center
        return (w.real / self.a) ** 2 + (w.imag / self.b) ** 2 < 1.0

    def initial_params(self, n: int, density: float = 0.0) -> np.ndarray:
        n = max(n, int(math.ceil(2 * math.pi * max(self.a, self.b) * density)))
        return np.arange(n) / n

    @property
    def scale(self) -> float:
        return max(self.a, self.b)

    def describe(self) -> str:
        return f"ellipse(center={self.center}, a={self.a}, b={self.b})"


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle ``[x0, x1] x [y0, y1]`` in the lam plane."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("box needs x0 < x1 and y0 < y1")

    @property
    def corners(self):
        return [complex(self.x0, self.y0), complex(self.x1, self.y0),
                complex(self.x1, self.y1), complex(self.x0, self.y1)]

    def point(self, s):
        s = np.mod(np.asarray(s, dtype=float), 1.0) * 4.0
        k = np.minimum(s.astype(int), 3)
        f = s - k
        c = np.array(self.corners + [self.corners[0]])
        return c[k] + f * (c[k + 1] - c[k])

    def derivative(self, s):
        s = np.mod(np.asarray(s, dtype=float), 1.0) * 4.0
        k = np.minimum(s.astype(int), 3)
        c = np.array(self.corners + [self.corners[0]])
        return 4.0 * (c[k + 1] - c[k])

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z)
        return (z.real > self.x0) & (z.real < self.x1) & (z.imag > self.y0) & (z.imag < self.y1)

    def initial_params(self, n_per_side: int, density: float = 0.0) -> np.ndarray:
        out = []
        for k, length in enumerate((self.x1 - self.x0, self.y1 - self.y0) * 2):
            m = max(n_per_side, int(math.ceil(length * density)))
            out.append((k + np.arange(m) / m) / 4.0)
        return np.concatenate(out)

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    @property
    def scale(self) -> float:
        return 0.5 * math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    def bounding(self) -> Ellipse:
        """Smallest-area ellipse through the four corners."""
        return Ellipse(self.center, (self.x1 - self.x0) / math.sqrt(2), (self.y1 - self.y0) / math.sqrt(2))

    def split(self, fraction: float = SPLIT_FRACTION):
        """Two halves across the longer side, cut at ``fraction`` of its length."""
        if self.x1 - self.x0 >= self.y1 - self.y0:
            xm = self.x0 + fraction * (self.x1 - self.x0)
            return Box(self.x0, xm, self.y0, self.y1), Box(xm, self.x1, self.y0, self.y1)
        ym = self.y0 + fraction * (self.y1 - self.y0)
        return Box(self.x0, self.x1, self.y0, ym), Box(self.x0, self.x1, ym, self.y1)

    def describe(self) -> str:
        return f"box({self.x0}, {self.x1}, {self.y0}, {self.y1})"


Contour = Circle | Ellipse | Box


def _encloses_origin(contour) -> bool:
    return bool(contour.contains(0j))


def _crosses_cut(contour, n: int = 2048) -> bool:
    """True if the closed contour meets the negative real axis (closed)."""
    z = contour.point(np.arange(n) / n)
    if np.any((z.real <= 0) & (np.abs(z.imag) < 1e-14)):
        return True
    z2 = np.roll(z, -1)
    flip = np.sign(z.imag) != np.sign(z2.imag)
    if not flip.any():
        return False
    t = z.imag[flip] / (z.imag[flip] - z2.imag[flip])
    xr = z.real[flip] + t * (z2.real[flip] - z.real[flip])
    return bool(np.any(xr <= 0))


# ------------------------------------------------------ characteristic map

class ResonanceProblem:
    """``T(lam) = I + V A(lam)`` on a fixed discretization.

    d = 1 point sets are assembled in closed form for batches of lam;
    other geometries fall back to one assembly per lam.
    """

    def __init__(self, gamma: GammaDiscretization, potential, quad_depth: int = 4):
        if not isinstance(potential, PotentialSpec):
            potential = (PotentialSpec.constant(potential) if np.isscalar(potential)
                         else PotentialSpec.from_matrix(potential))
        self.gamma = gamma
        self.potential = potential
        self.v = potential.as_matrix(gamma.n)
        self.quad_depth = quad_depth
        self.n = gamma.n
        self.dimension = gamma.dimension
        self._points = gamma.dimension == 1
        if self._points:
            x = gamma.nodes[:, 0]
            self._dist = np.abs(x[:, None] - x[None, :])

    @property
    def is_zero(self) -> bool:
        return not np.any(self.v)

    def layer(self, lams) -> np.ndarray:
        """Stacked ``A(lam)`` for an array of lam, shape (M, N, N)."""
        lams = np.atleast_1d(np.asarray(lams, dtype=complex))
        if np.any(np.abs(lams) < LAMBDA_MIN):
            raise ContourError("spectral parameter too close to 0")
        if self._points:
            return 0.5j / lams[:, None, None] * np.exp(1j * lams[:, None, None] * self._dist[None])
        return np.stack([assemble(self.gamma, lam, self.quad_depth).entries for lam in lams])

    def matrices(self, lams) -> np.ndarray:
        a = self.layer(lams)
        return np.eye(self.n)[None] + np.einsum("ij,mjk->mik", self.v, a)

    def slogdet(self, lams):
        """``(sign, log|det|)`` of T for each lam (vectorized LU)."""
        sign, logabs = np.linalg.slogdet(self.matrices(lams))
        return sign, logabs

    @property
    def phase_density(self) -> float:
        """Initial contour nodes per unit length.

        Each term of ``det T`` oscillates like ``exp(i lam s)`` with
        ``s <= N d_gamma``; sampling at this density keeps the phase step
        near one radian so that bisection cannot miss a full turn.
        """
        return 1.0 + min(self.n, 8) * self.gamma.d_gamma

    def regularized_slogdet(self, lams):
        """``(sign, log|D|)`` of ``D = lam^N det T`` in d = 1 (entire in lam), else of ``det T``."""
        lams = np.atleast_1d(np.asarray(lams, dtype=complex))
        sign, logabs = self.slogdet(lams)
        if self.dimension == 1:
            sign = sign * (lams / np.abs(lams)) ** self.n
            logabs = logabs + self.n * np.log(np.abs(lams))
        return sign, logabs

    def residual(self, lam) -> float:
        """Smallest singular value of ``T(lam)``."""
        return float(np.linalg.svd(self.matrices([lam])[0], compute_uv=False)[-1])


def _problem(gamma_or_problem, potential=None) -> ResonanceProblem:
    if isinstance(gamma_or_problem, ResonanceProblem):
        return gamma_or_problem
    return ResonanceProblem(gamma_or_problem, potential)


def char_det(gamma, potential, lam):
    """``(log|det T(lam)|, arg det T(lam))`` with ``T = I + V A``.

    A singular LU returns ``(-inf, 0.0)``.
    """
    prob = _problem(gamma, potential)
    sign, logabs = prob.slogdet([lam])
    if sign[0] == 0:
        return -math.inf, 0.0
    return float(logabs[0]), float(np.angle(sign[0]))


# ------------------------------------------------------------- counting

@dataclass
class WindingResult:
    count: int
    raw: float
    n_nodes: int
    origin_correction: int = 0


def _winding(prob: ResonanceProblem, contour, n_init: int, max_levels: int = 14,
             check_residual: bool = True) -> WindingResult:
    s = _safe_params(prob, contour, contour.initial_params(n_init, prob.phase_density))
    s = np.append(s, s[0] + 1.0)
    sign, logabs = prob.regularized_slogdet(contour.point(s))
    for _ in range(max_levels):
        if np.any(sign == 0) or not np.all(np.isfinite(logabs)):
            raise ContourError(f"determinant vanishes on {contour.describe()}")
        dphi = np.angle(sign[1:] / sign[:-1])
        bad = np.abs(dphi) > 0.5 * np.pi
        if not bad.any():
            break
        mids = 0.5 * (s[:-1][bad] + s[1:][bad])
        ms, ml = prob.regularized_slogdet(contour.point(mids))
        s = np.concatenate([s, mids])
        order = np.argsort(s, kind="stable")
        s = s[order]
        sign = np.concatenate([sign, ms])[order]
        logabs = np.concatenate([logabs, ml])[order]
    else:
        raise ContourError(f"phase jumps persist after {max_levels} refinements on {contour.describe()}; "
                           "a zero is likely on or very near the contour")
    if check_residual and prob.n <= 64:
        pts = contour.point(s[:-1])
        mats = prob.matrices(pts[np.abs(pts) > 1e-3])
        smin = np.linalg.svd(mats, compute_uv=False)[:, -1]
        if smin.min() < 1e-6:
            raise ContourError(f"contour passes within ~1e-6 of a zero (min residual {smin.min():.2e})")
    raw = float(np.sum(dphi) / (2 * np.pi))
    count = int(round(raw))
    if abs(raw - count) > 1e-3:
        raise ContourError(f"non-integer winding {raw:.4f} on {contour.describe()}")
    return WindingResult(count, raw, len(s) - 1)


def _safe_params(prob, contour, s):
    """Shift the parameter grid by half a step if a node lands on lam = 0 (d = 1)."""
    s = np.asarray(s, dtype=float)
    if prob.dimension == 1 and np.min(np.abs(contour.point(s))) < 1e-9:
        step = s[1] - s[0] if len(s) > 1 else 0.5
        s = s + 0.5 * step
    return s


def count_zeros(gamma, potential, contour, nodes_per_side: int = 64) -> int:
    """Zeros of ``det T`` inside ``contour`` by the argument principle.

    Phase increments larger than pi/2 between neighbouring nodes trigger
    bisection of that edge. Raises :class:`ContourError` if the phase cannot
    be resolved or the contour runs through a zero.
    """
    return _count(_problem(gamma, potential), contour, nodes_per_side).count


def _count(prob: ResonanceProblem, contour, nodes_per_side: int = 64) -> WindingResult:
    if prob.is_zero:
        return WindingResult(0, 0.0, 0)
    if prob.dimension == 2:
        if _encloses_origin(contour) or _crosses_cut(contour):
            raise ContourError("in d = 2 contours must avoid the origin and the negative real axis")
    n = nodes_per_side if isinstance(contour, Box) else 4 * nodes_per_side
    res = _winding(prob, contour, n)
    if prob.dimension == 1:
        # D = lam^N det T is entire; remove its zero at the origin if enclosed
        dist = _distance_to_contour(contour, 0j)
        order0 = _origin_order(prob, min(1e-3, 0.1 * dist) if dist > 1e-9 else 1e-3)
        if dist <= 1e-9 and order0 > 0:
            raise ContourError("contour passes through lam = 0 where det T has a pole")
        if _encloses_origin(contour):
            res = WindingResult(res.count - order0, res.raw - order0, res.n_nodes, -order0)
    return res


def _origin_order(prob: ResonanceProblem, radius: float) -> int:
    """Order of the zero of ``lam^N det T`` at the origin (d = 1)."""
    return _winding(prob, Circle(0j, radius), 64, check_residual=False).count


def _distance_to_contour(contour, z: complex, n: int = 4096) -> float:
    return float(np.min(np.abs(contour.point(np.arange(n) / n) - z)))


# ----------------------------------------------------------------- Newton

@dataclass
class NewtonResult:
    lam: complex
    residual: float
    iterations: int
    trace: list


def refine_newton(gamma, potential, lam0, tol: float = 1e-10, max_iter: int = 50,
                  basin_check: bool = False) -> NewtonResult:
    """Newton iteration on ``det T(lam)`` with a central-difference derivative.

    The step is formed from determinant ratios
    ``det T(lam +- h) / det T(lam)``, which stay finite as lam approaches
    a root. Stops once ``|step| < tol``; that last step is still applied.
    """
    prob = _problem(gamma, potential)
    lam = complex(lam0)
    if basin_check and prob.residual(lam) > 0.1:
        raise ConvergenceError(f"start {lam} is outside the Newton basin (residual > 0.1)", last=lam)
    trace = [lam]
    steps = []
    for it in range(max_iter):
        h = 1e-6 * max(1.0, abs(lam))
        sign, logabs = prob.slogdet([lam, lam + h, lam - h])
        if sign[0] == 0:
            return NewtonResult(lam, prob.residual(lam), it, trace)
        rp = sign[1] / sign[0] * np.exp(logabs[1] - logabs[0])
        rm = sign[2] / sign[0] * np.exp(logabs[2] - logabs[0])
        deriv = (rp - rm) / (2 * h)
        if deriv == 0 or not np.isfinite(deriv):
            raise ConvergenceError("zero derivative in Newton step", last=lam, trace=trace)
        step = -1.0 / deriv
        lam = lam + step
        trace.append(lam)
        if abs(step) < tol:
            return NewtonResult(lam, prob.residual(lam), it + 1, trace)
        steps.append(abs(step))
        if len(steps) >= 4 and steps[-1] > steps[-2] > steps[-3] > steps[-4]:
            raise ConvergenceError("Newton iteration diverging", last=lam, trace=trace)
    raise ConvergenceError(f"Newton did not converge in {max_iter} steps", last=lam, trace=trace)


# ------------------------------------------------------------------- Beyn

@dataclass
class Resonance:
    lam: complex
    multiplicity: int
    residual: float
    null_vectors: np.ndarray
    method: str = "contour"
    beyn_lam: complex | None = None
    newton_lam: complex | None = None
    nullity: int = 1

    @property
    def agreement(self) -> float:
        """``|beyn - newton|``, the cross-solver discrepancy."""
        if self.beyn_lam is None or self.newton_lam is None:
            return math.nan
        return abs(self.beyn_lam - self.newton_lam)


@dataclass
class ResonanceSet:
    items: list = field(default_factory=list)
    region: str = ""
    count_check: int | None = None

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([r.lam for r in self.items], dtype=complex)

    @property
    def total_multiplicity(self) -> int:
        return sum(r.multiplicity for r in self.items)

    def sorted(self) -> "ResonanceSet":
        items = sorted(self.items, key=lambda r: (round(r.lam.real, 9), -r.lam.imag))
        return ResonanceSet(items, self.region, self.count_check)

    def symmetric_pairing(self, tol: float = 1e-7) -> float:
        """Largest distance from ``-conj(lam)`` to the nearest member."""
        lam = self.lambdas
        if lam.size == 0:
            return 0.0
        mirror = -lam.conj()
        return float(np.max(np.min(np.abs(mirror[:, None] - lam[None, :]), axis=1)))

    def to_csv(self, path_or_buf=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RESONANCE_COLUMNS)
        for r in self.sorted().items:
            w.writerow([f"{round(r.lam.real, 12) + 0.0:.12f}", f"{round(r.lam.imag, 12) + 0.0:.12f}",
                        r.multiplicity,
                        f"{r.residual:.3e}", r.method])
        text = buf.getvalue()
        if path_or_buf is not None:
            if hasattr(path_or_buf, "write"):
                path_or_buf.write(text)
            else:
                with open(path_or_buf, "w", newline="") as fh:
                    fh.write(text)
        return text


def _probe(n: int, rank: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))


def _beyn_eigs(prob: ResonanceProblem, contour, rank: int, moments: int, quad_nodes: int,
               seed: int, cutoff: float = 1e-8):
    """Raw eigenvalues of the block-Hankel moment pencil inside ``contour``."""
    c = contour.center
    rho = contour.scale
    s = _safe_params(prob, contour, np.arange(quad_nodes) / quad_nodes)
    z = contour.point(s)
    dz = contour.derivative(s) / quad_nodes
    probe = _probe(prob.n, rank, seed)
    x = np.linalg.solve(prob.matrices(z), np.broadcast_to(probe, (len(z),) + probe.shape))
    mu = (z - c) / rho
    wts = dz / (2j * np.pi)
    mom = [np.einsum("m,mij->ij", wts * mu ** p, x) for p in range(2 * moments)]
    h0 = np.block([[mom[i + j] for j in range(moments)] for i in range(moments)])
    h1 = np.block([[mom[i + j + 1] for j in range(moments)] for i in range(moments)])
    u, sv, wh = np.linalg.svd(h0, full_matrices=False)
    if sv.size == 0 or sv[0] == 0:
        return np.array([], dtype=complex), np.zeros((prob.n, 0), dtype=complex), 0
    k = int(np.sum(sv > cutoff * sv[0]))
    if k == min(h0.shape):
        raise ProbeRankError(f"moment matrix has full rank {k}; increase probes or moments")
    uk, sk, wk = u[:, :k], sv[:k], wh[:k].conj().T
    b = uk.conj().T @ h1 @ wk / sk[None, :]
    ev, vec = np.linalg.eig(b)
    lam = c + rho * ev
    vecs = (uk @ vec)[:prob.n]
    return lam, vecs, k


def beyn_solve(gamma, potential, contour, probe_rank: int | None = None, quad_nodes: int = 64,
               seed: int = PROBE_SEED, polish: bool = True, expected: int | None = None) -> ResonanceSet:
    """Contour-moment eigensolver for ``T(lam)`` inside ``contour``.

    Boxes are integrated on the ellipse through their corners and the
    eigenvalues filtered back to the box. When N is small the probe block
    is supplemented with higher moments so that ``rank * moments`` exceeds
    the expected count by at least 2. Each eigenvalue is then re-solved on
    a small circle around it and, independently, polished by Newton;
    both values are recorded. The total multiplicity is checked against
    :func:`count_zeros`.
    """
    prob = _problem(gamma, potential)
    if quad_nodes < 32:
        raise ValueError("quad_nodes must be at least 32")
    if prob.is_zero:
        return ResonanceSet([], contour.describe(), 0)
    count = _count(prob, contour).count if expected is None else expected
    if count == 0:
        return ResonanceSet([], contour.describe(), 0)
    outer = contour.bounding() if isinstance(contour, (Box, Circle)) else contour
    if prob.dimension == 2 and (_encloses_origin(outer) or _crosses_cut(outer)):
        raise ContourError("integration contour reaches the origin or the negative real axis")
    outer_count = _count(prob, outer).count if outer is not contour else count
    raw = _beyn_adaptive(prob, outer, outer_count, probe_rank, quad_nodes, seed)
    if prob.dimension == 1:
        raw = raw[np.abs(raw) > 1e-3 * max(1.0, outer.scale)]
    raw = raw[contour.contains(raw)]
    items = []
    for lam0 in raw:
        item = _resolve_one(prob, lam0, raw, contour, seed, polish)
        if item is not None:
            items.append(item)
    items = _merge(items)
    total = sum(r.multiplicity for r in items)
    if total != count:
        raise InconsistencyError(f"contour solver found multiplicity {total}, argument principle counts {count} "
                                 f"on {contour.describe()}")
    return ResonanceSet(items, contour.describe(), count)


def _beyn_adaptive(prob, contour, count, probe_rank, quad_nodes, seed, max_nodes: int = 2048):
    """Beyn eigenvalues inside ``contour``, doubling the quadrature until stable."""
    rank = min(prob.n, probe_rank if probe_rank is not None else count + 2)
    moments = max(1, math.ceil((count + 4) / rank))
    prev = None
    n = quad_nodes
    while True:
        for _ in range(8):
            try:
                lam, _, k = _beyn_eigs(prob, contour, rank, moments, n, seed)
            except ProbeRankError:
                moments += 2
                continue
            if k >= count:
                break
            # rank below the zero count: too few moments to separate them
            moments += 1
        else:
            raise ProbeRankError("moment matrix stays full rank; too many zeros inside the contour")
        # eigenvalues outside the contour are artefacts of the reduction
        lam = np.sort_complex(lam[contour.contains(lam)])
        if prev is not None and len(prev) == len(lam):
            if len(lam) == 0 or np.max(np.min(np.abs(lam[:, None] - prev[None, :]), axis=1)) < 1e-6 * contour.scale:
                return lam
        if 2 * n > max_nodes:
            raise ConvergenceError(f"contour eigenvalues not stable with {n} nodes on {contour.describe()}",
                                   last=lam)
        prev = lam
        n *= 2


def _resolve_one(prob, lam0, neighbours, contour, seed, polish):
    others = neighbours[np.abs(neighbours - lam0) > 1e-12]
    gap = float(np.min(np.abs(others - lam0))) if others.size else math.inf
    radius = min(0.4 * gap, 0.05 * contour.scale, 0.25 * abs(lam0), 0.5)
    if radius <= 1e-9:
        radius = 1e-9
    local = Circle(lam0, radius)
    m = _count(prob, local, 32).count
    if m == 0:
        return None
    rank = min(prob.n, m + 2)
    moments = max(1, math.ceil((m + 2) / rank))
    lam_loc, vecs, _ = _beyn_eigs(prob, local, rank, moments, 64, seed)
    inside = local.contains(lam_loc)
    if inside.any():
        k = int(np.argmin(np.abs(lam_loc[inside] - lam0)))
        beyn = complex(np.mean(lam_loc[inside])) if m > 1 else complex(lam_loc[inside][k])
    else:
        beyn = complex(lam0)
    newton = refine_newton(prob, None, lam0).lam if polish else None
    lam = newton if newton is not None else beyn
    residual, nulls, nullity = _null_space(prob, lam)
    return Resonance(lam, m, residual, nulls, "contour", beyn, newton, nullity)


def _null_space(prob, lam, rel: float = 1e-6):
    t = prob.matrices([lam])[0]
    _, sv, vh = np.linalg.svd(t)
    k = max(1, int(np.sum(sv < rel * sv[0])))
    return float(sv[-1]), vh[-k:].conj().T, k


def _merge(items, tol: float = 1e-7):
    out = []
    for it in items:
        if any(abs(it.lam - o.lam) < tol * max(1.0, abs(o.lam)) for o in out):
            continue
        out.append(it)
    return out


def find_resonances(gamma, potential, box: Box, max_per_cell: int = 4, quad_nodes: int = 64,
                    nodes_per_side: int = 64, seed: int = PROBE_SEED, min_size: float = 1e-6,
                    max_cell: float | None = None) -> ResonanceSet:
    """All resonances in ``box`` by argument-principle subdivision.

    Cells holding more than ``max_per_cell`` zeros, or with a side longer
    than ``max_cell`` (default ``max(1, 4 / d_gamma)``), are split
    across their longer side at an off-centre fraction. Bounding the cell
    size keeps the dynamic range of ``T^{-1}`` on each moment contour
    moderate. A cell edge that passes through a zero is moved and retried.
    """
    prob = _problem(gamma, potential)
    if prob.is_zero:
        return ResonanceSet([], box.describe(), 0)
    if max_cell is None:
        max_cell = max(1.0, 4.0 / max(prob.gamma.d_gamma, 1e-12))
    total = _count(prob, box, nodes_per_side).count
    found = []
    stack = [(box, total)]
    while stack:
        cell, cnt = stack.pop()
        if cnt == 0:
            continue
        side = max(cell.x1 - cell.x0, cell.y1 - cell.y0)
        if (cnt <= max_per_cell and side <= max_cell) or side < min_size:
            found.extend(beyn_solve(prob, None, cell, quad_nodes=quad_nodes, seed=seed,
                                    expected=cnt).items)
            continue
        for frac in (SPLIT_FRACTION, 0.4523, 0.5317, 0.4109, 0.5791):
            a, b = cell.split(frac)
            try:
                ca = _count(prob, a, nodes_per_side).count
                cb = _count(prob, b, nodes_per_side).count
            except ContourError:
                continue
            if ca + cb != cnt:
                raise InconsistencyError(f"sub-cell counts {ca}+{cb} != {cnt} for {cell.describe()}")
            stack.extend([(b, cb), (a, ca)])
            break
        else:
            raise ContourError(f"could not split {cell.describe()} away from zeros")
    rs = ResonanceSet(_merge(found), box.describe(), total)
    if rs.total_multiplicity != total:
        raise InconsistencyError(f"found multiplicity {rs.total_multiplicity}, box count {total}")
    return rs.sorted()


# -------------------------------------------------------- cross-validation

@dataclass
class CrossValidation:
    max_disagreement: float
    count_matches: bool
    n: int

    def passed(self, tol: float = 1e-8) -> bool:
        return self.count_matches and self.max_disagreement < tol


def cross_validate(rset: ResonanceSet) -> CrossValidation:
    """Compare the contour and Newton values of every resonance."""
    dis = [r.agreement for r in rset.items]
    worst = float(np.nanmax(dis)) if dis else 0.0
    ok = rset.count_check is None or rset.count_check == rset.total_multiplicity
    return CrossValidation(worst, ok, len(rset))


def outgoing_residual(gamma: GammaDiscretization, potential, lam, f) -> float:
    """``|| f + V gamma u || / ||f||`` with ``u = sum_k G0(lam, |x - x_k|) f_k w_k``."""
    prob = _problem(gamma, potential)
    a = assemble(gamma, lam).entries
    f = np.asarray(f)
    return float(np.linalg.norm(f + prob.v @ (a @ f)) / np.linalg.norm(f))


# ------------------------------------------------------------ free region

@dataclass
class FreeRegionReport:
    slope: float
    r_min: float
    checked: list
    excluded: list
    violations: list
    threshold: float

    @property
    def passed(self) -> bool:
        return not self.violations


def free_region_check(rset, d_gamma: float, eps: float, r_min: float = 10.0) -> FreeRegionReport:
    """Check ``Im lam <= -(1/(2 d_gamma) - eps) log|Re lam|`` for ``|Re lam| >= r_min``.

    ``threshold`` is the smallest R above which no violation occurs.
    """
    slope = 0.5 / d_gamma - eps
    lams = rset.lambdas if isinstance(rset, ResonanceSet) else np.asarray(rset, dtype=complex)
    checked, excluded, viol = [], [], []
    for lam in lams:
        if abs(lam.real) < r_min:
            excluded.append(complex(lam))
            continue
        checked.append(complex(lam))
        if lam.imag > -slope * math.log(abs(lam.real)):
            viol.append(complex(lam))
    threshold = max([abs(v.real) for v in viol], default=r_min)
    return FreeRegionReport(slope, r_min, checked, excluded, viol, threshold)


# ------------------------------------------------------------ resolvent

def resolvent_apply(gamma: GammaDiscretization, potential, lam, g: PiecewisePolynomial, x,
                    max_condition: float = 1e7) -> np.ndarray:
    """``R_V(lam) g`` at points ``x`` for d = 1 point sets.

    ``R_V g = R0 g - sum_j G0(lam, |x - x_j|) h_j`` with
    ``(I + V A) h = V (R0 g)(x_j)``.
    """
    if gamma.dimension != 1:
        raise ValueError("resolvent_apply is implemented for d = 1")
    prob = _problem(gamma, potential)
    lam = complex(lam)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u0 = free_resolvent_1d(g, lam, x)
    if prob.is_zero:
        return u0
    xj = gamma.nodes[:, 0]
    trace = free_resolvent_1d(g, lam, xj)
    t = prob.matrices([lam])[0]
    # measured against the identity so that a 1x1 system near a pole is caught
    sv = np.linalg.svd(t, compute_uv=False)
    cond = max(sv[0], 1.0) / sv[-1] if sv[-1] > 0 else math.inf
    if not np.isfinite(cond) or cond > max_condition:
        raise IllConditionedError(f"I + VA is ill-conditioned at lam={lam} (cond {cond:.2e}); "
                                  "too close to a resonance", condition=cond)
    h = np.linalg.solve(t, prob.v @ trace)
    return u0 - green_kernel(1, lam, np.abs(x[:, None] - xj[None, :])) @ h


def _resolvent_batch(prob, g, lams, x):
    return np.array([resolvent_apply(prob.gamma, prob.potential, lam, g, x) for lam in lams])


def residue_extract(gamma: GammaDiscretization, potential, lam_j, m: int, g: PiecewisePolynomial,
                    t, x, radius: float | None = None, others: Sequence[complex] = (),
                    nodes: int | None = None, tol: float = 1e-6) -> np.ndarray:
    """``Res(exp(-i t lam) R_V(lam) g, lam_j)`` at points ``x`` for each time in ``t``.

    Trapezoid rule with ``64 m`` nodes on a circle around ``lam_j``,
    repeated with twice the nodes; the doubled result is returned.

    Returns
    -------
    ndarray, shape (len(t), len(x))
    """
    prob = _problem(gamma, potential)
    lam_j = complex(lam_j)
    others = [complex(o) for o in others if abs(complex(o) - lam_j) > 1e-12]
    gap = min((abs(o - lam_j) for o in others), default=math.inf)
    if radius is None:
        radius = 0.25 * gap if math.isfinite(gap) else 0.25 * min(1.0, max(abs(lam_j), 1.0))
        if lam_j != 0 and prob.dimension == 1:
            radius = min(radius, 0.5 * abs(lam_j))
    if gap <= 2.0 * radius:
        raise PoleTooCloseError(f"another pole lies within {gap:.3g} of {lam_j}, contour radius {radius:.3g}")
    circle = Circle(lam_j, radius)
    if not prob.is_zero and lam_j != 0:
        cnt = _count(prob, circle, 32).count
        if cnt != m:
            raise PoleTooCloseError(f"circle around {lam_j} encloses {cnt} zeros, expected {m}")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = nodes if nodes is not None else 64 * max(1, m)

    def integrate(k):
        s = np.arange(k) / k
        z = circle.point(s)
        dz = circle.derivative(s) / k
        vals = _resolvent_batch(prob, g, z, x)
        phase = np.exp(-1j * np.outer(t, z)) * dz[None, :] / (2j * np.pi)
        return phase @ vals

    coarse = integrate(n)
    fine = integrate(2 * n)
    scale = max(1.0, float(np.max(np.abs(fine))))
    if np.max(np.abs(fine - coarse)) > tol * scale:
        raise ConvergenceError(f"residue quadrature at {lam_j} not converged "
                               f"(change {np.max(np.abs(fine - coarse)):.2e})", last=fine)
    return fine
