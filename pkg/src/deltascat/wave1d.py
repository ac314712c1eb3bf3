"""Wave equation on the line with a potential supported on finitely many points.

The scheme is leapfrog on a uniform grid. At a delta node the second
difference picks up ``-(V u)_j / h``, a consistent discretization of the
jump ``[u_x] = (V u)_j``. The time-domain field is compared with the
resonance expansion ``u(t) = -i sum Res(exp(-i t lam) R_V(lam) g)``.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import CFLError, GridAlignmentError, IncompleteExpansionError
from .geometry import GammaDiscretization, build_points
from .layer import PotentialSpec
from .resonances import Box, ResonanceSet, count_zeros, find_resonances, residue_extract
from .sources import PiecewisePolynomial, antiderivative

TRAJECTORY_COLUMNS = ("t", "x", "u")
COMPARISON_COLUMNS = ("t", "l2_error", "expansion_norm")


def _points(points) -> np.ndarray:
    if isinstance(points, GammaDiscretization):
        if points.dimension != 1:
            raise ValueError("the wave solver needs a d = 1 point set")
        return points.nodes[:, 0].copy()
    return np.atleast_1d(np.asarray(points, dtype=float)).ravel()


def _potential_matrix(V, n: int) -> np.ndarray:
    if isinstance(V, PotentialSpec):
        m = V.as_matrix(n)
    elif np.isscalar(V):
        m = float(np.real(V)) * np.eye(n) if np.isreal(V) else V * np.eye(n)
    else:
        arr = np.asarray(V)
        m = np.diag(arr) if arr.ndim == 1 else arr
    if m.shape != (n, n):
        raise ValueError(f"potential shape {m.shape} does not match {n} points")
    if np.any(np.imag(m) != 0):
        raise ValueError("the wave solver needs a real potential")
    m = np.real(m).astype(float)
    if not np.allclose(m, m.T, rtol=0, atol=1e-12 * max(1.0, np.abs(m).max())):
        raise ValueError("potential matrix must be symmetric")
    return m


# ------------------------------------------------------------------ state

@dataclass
class WaveState:
    """Two time levels of the discrete field.

    ``u_prev`` lives at ``t - dt`` and ``u`` at ``t``. ``delta_index``
    holds the grid indices of the delta points.
    """

    x: np.ndarray
    h: float
    dt: float
    t: float
    u_prev: np.ndarray
    u: np.ndarray
    delta_index: np.ndarray
    V: np.ndarray
    g: PiecewisePolynomial

    def energy(self) -> float:
        """Discrete energy between the two stored levels (exactly conserved by the scheme).

        ``E = 1/2 |D_t u|^2 + 1/2 <D_x u^{n+1}, D_x u^n> + 1/2 <V u^{n+1}, u^n>_Gamma``
        """
        return _energy(self.u_prev, self.u, self.h, self.dt, self.delta_index, self.V)


def _energy(um, uc, h, dt, idx, V) -> float:
    ut = (uc - um) / dt
    kin = 0.5 * h * float(ut @ ut)
    pot = 0.5 * float(np.diff(uc) @ np.diff(um)) / h
    gam = 0.5 * float(uc[idx] @ (V @ um[idx]))
    return kin + pot + gam


@dataclass
class Trajectory:
    """Snapshots of an ``evolve`` run.

    ``energy[k]`` is the discrete energy at ``energy_times[k] = (k + 1/2) dt``.
    """

    x: np.ndarray
    times: np.ndarray
    snapshots: np.ndarray
    energy_times: np.ndarray
    energy: np.ndarray
    state: WaveState
    points: np.ndarray
    reach: float

    @property
    def h(self) -> float:
        return self.state.h

    @property
    def dt(self) -> float:
        return self.state.dt

    def at(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"no snapshot at t={t}; available: {self.times.tolist()}")
        return self.snapshots[k]

    def energy_drift(self, t_max: float | None = None) -> float:
        """``max |E(t) - E(0)| / E(0)`` over the recorded energies up to ``t_max``."""
        e = self.energy if t_max is None else self.energy[self.energy_times <= t_max]
        return float(np.max(np.abs(e - e[0])) / abs(e[0]))

    def to_csv(self, path_or_buf=None, window: float | None = None, stride: int = 1) -> str:
        """``t,x,u`` rows for every snapshot, optionally restricted to ``|x| <= window``."""
        m = np.ones(self.x.shape, bool) if window is None else np.abs(self.x) <= window + 1e-12
        idx = np.flatnonzero(m)[::stride]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for t, u in zip(self.times, self.snapshots):
            for k in idx:
                w.writerow([repr(float(t)), repr(float(self.x[k])), repr(float(u[k]))])
        return _emit(buf.getvalue(), path_or_buf)


def _emit(text: str, path_or_buf) -> str:
    if path_or_buf is not None:
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)
    return text


def grid_index(points, h: float, x0: float) -> np.ndarray:
    """Indices of ``points`` on the grid ``x0 + k h``; raises if any point is off-grid."""
    k = (np.asarray(points, dtype=float) - x0) / h
    kr = np.rint(k)
    off = np.abs(k - kr) > 1e-9 * np.maximum(1.0, np.abs(k))
    if np.any(off):
        bad = np.asarray(points)[off]
        raise GridAlignmentError(f"points {bad.tolist()} are not on the grid with h={h}")
    return kr.astype(int)


def _common_step(times) -> float | None:
    """Largest step dividing every time (times as fractions with denominator <= 1000)."""
    fr = [Fraction(float(t)).limit_denominator(1000) for t in times]
    if any(abs(float(f) - t) > 1e-12 * max(1.0, abs(t)) for f, t in zip(fr, times)):
        return None
    den = math.lcm(*(f.denominator for f in fr))
    num = math.gcd(*(int(f * den) for f in fr))
    return num / den if num else None


def cfl_number(V: np.ndarray, h: float, cfl: float) -> float:
    """``cfl^2 (1 + h rho / 4)`` with ``rho`` the largest absolute row sum of V; must be <= 1."""
    rho = float(np.max(np.sum(np.abs(V), axis=1))) if V.size else 0.0
    return cfl * cfl * (1.0 + h * rho / 4.0)


def evolve(points, V, g: PiecewisePolynomial, T: float, h: float, cfl: float = 0.9,
           X: float | None = None, snapshot_times: Sequence[float] | None = None) -> Trajectory:
    """Solve ``(d_t^2 - d_x^2 + V delta_Gamma) u = 0``, ``u(0) = 0``, ``u_t(0) = g``.

    Parameters
    ----------
    points : array_like or GammaDiscretization
        Delta locations. Each must be an integer multiple of ``h``.
    V : float, array_like or PotentialSpec
        Real symmetric coupling between the points.
    g : PiecewisePolynomial
        Initial velocity.
    T : float
        Final time.
    h : float
        Grid spacing. The grid is ``k h`` for integer ``k``.
    cfl : float
        Upper bound for ``dt / h``. The step is chosen to divide every
        snapshot time when they share a rational common step.
    X : float, optional
        Half-width of the domain. Defaults to the smallest grid multiple
        beyond ``T + reach + 1``, where ``reach`` bounds the support of g
        and the points. Waves never reach the Dirichlet ends before T.
    snapshot_times : sequence of float, optional
        Times at which the field is stored (default ``[T]``).

    Raises
    ------
    GridAlignmentError
        A point is not a grid node.
    CFLError
        ``cfl^2 (1 + h max_j sum_k |V_jk| / 4) > 1``.
    """
    if T <= 0 or h <= 0 or cfl <= 0:
        raise ValueError("T, h and cfl must be positive")
    pts = _points(points)
    Vm = _potential_matrix(V, len(pts))
    a, b = g.support
    reach = max(abs(a), abs(b), float(np.max(np.abs(pts))) if pts.size else 0.0)
    if X is None:
        X = T + reach + 1.0
    elif T >= X - reach:
        raise ValueError(f"domain half-width {X} too small: waves reach the boundary before T={T}")
    M = int(math.ceil(X / h - 1e-9))
    x = h * np.arange(-M, M + 1)
    idx = grid_index(pts, h, 0.0) + M

    times = np.array([T] if snapshot_times is None else sorted(snapshot_times), dtype=float)
    if np.any(times < 0) or np.any(times > T + 1e-12):
        raise ValueError("snapshot times must lie in [0, T]")
    unit = _common_step(np.append(times, T))
    if unit is not None and unit >= 0.5 * cfl * h:
        dt = unit / math.ceil(unit / (cfl * h) - 1e-9)
    else:
        dt = T / math.ceil(T / (cfl * h) - 1e-9)
    nsteps = int(round(T / dt))
    if cfl_number(Vm, h, dt / h) > 1.0 + 1e-12:
        raise CFLError(f"cfl^2 (1 + h rho/4) = {cfl_number(Vm, h, dt / h):.4f} > 1; "
                       "reduce cfl or h")

    steps = np.rint(times / dt).astype(int)
    if np.any(np.abs(steps * dt - times) > 1e-9 * np.maximum(1.0, times)):
        warnings.warn("snapshot times are not multiples of dt; nearest steps used", RuntimeWarning,
                      stacklevel=2)
        times = steps * dt

    # First step: exact free half-sum of g over [x - dt, x + dt], plus the
    # leading Taylor correction from the delta term (u(0) = 0 so it is O(dt^3)).
    G = lambda s: antiderivative(g, s)
    um = np.zeros_like(x)
    uc = 0.5 * (G(x + dt) - G(x - dt))
    uc[idx] -= dt**3 / 6.0 * (Vm @ g(x[idx])) / h
    uc[0] = uc[-1] = 0.0

    snaps = np.zeros((len(times), len(x)))
    for k, s in enumerate(steps):
        if s == 0:
            snaps[k] = um
        elif s == 1:
            snaps[k] = uc
    energy = np.empty(nsteps)
    energy[0] = _energy(um, uc, h, dt, idx, Vm)
    r2 = (dt / h) ** 2
    c = dt * dt / h
    # Only the numerical light cone is updated; the field is exactly zero outside it.
    K = len(x)
    lo = max(1, int(np.searchsorted(x, -(reach + dt) - h)))
    hi = min(K - 2, int(np.searchsorted(x, reach + dt + h)))
    um = um.copy()
    for n in range(1, nsteps):
        lo, hi = max(lo - 1, 1), min(hi + 1, K - 2)
        s = slice(lo, hi + 1)
        um[s] = 2.0 * uc[s] - um[s] + r2 * (uc[lo + 1:hi + 2] - 2.0 * uc[s] + uc[lo - 1:hi])
        um[idx] -= c * (Vm @ uc[idx])
        um, uc = uc, um
        w = slice(lo - 1, hi + 2)
        energy[n] = _energy(um[w], uc[w], h, dt, idx - (lo - 1), Vm)
        hit = steps == n + 1
        if hit.any():
            snaps[hit] = uc
    state = WaveState(x, h, dt, nsteps * dt, um, uc, idx, Vm, g)
    return Trajectory(x, times, snaps, (np.arange(nsteps) + 0.5) * dt, energy, state, pts, reach)


# -------------------------------------------------------------- expansion

@dataclass
class Expansion:
    """Truncated resonance expansion evaluated on a grid.

    ``field[i, k]`` is the sum at ``t[i]``, ``x[k]``; ``terms`` maps each
    pole to its contribution. The exact field is real, so ``field.imag``
    measures the quadrature error of the residues.
    """

    t: np.ndarray
    x: np.ndarray
    field: np.ndarray
    terms: dict = field(default_factory=dict)
    poles: list = field(default_factory=list)
    A: float = math.inf

    def __call__(self, t, x=None) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        rows = [int(np.argmin(np.abs(self.t - s))) for s in t]
        if any(abs(self.t[r] - s) > 1e-9 * max(1.0, abs(s)) for r, s in zip(rows, t)):
            raise KeyError("expansion was not evaluated at the requested times")
        out = self.field[rows]
        if x is not None and (len(x) != len(self.x) or np.any(np.asarray(x) != self.x)):
            raise KeyError("expansion was evaluated on different points")
        return out

    @property
    def imag_defect(self) -> float:
        return float(np.max(np.abs(self.field.imag))) if self.field.size else 0.0


def _pole_list(poles) -> list:
    """Normalize to ``[(lam, multiplicity), ...]``."""
    if poles is None:
        return []
    if isinstance(poles, ResonanceSet):
        return [(complex(r.lam), int(r.multiplicity)) for r in poles.items]
    out = []
    for p in poles:
        if isinstance(p, tuple):
            out.append((complex(p[0]), int(p[1])))
        else:
            out.append((complex(p), 1))
    return out


def audit_box(poles, A: float, V: np.ndarray, margin: float = 1.0) -> Box:
    """Default region for the completeness audit.

    Spans ``Im lam in (-A, top)`` with ``top`` above every eigenvalue
    ``i mu``, ``mu <= sum |V| / 2``, and the real extent of the supplied poles.
    """
    re = max([abs(p.real) for p, _ in poles] + [0.0]) + margin
    top = 1.0 + 0.5 * float(np.sum(np.abs(V)))
    top = max(top, max([p.imag for p, _ in poles] + [0.0]) + margin)
    return Box(-re, re, -A, top)


def expansion_eval(points, V, g: PiecewisePolynomial, t, x, poles, A: float,
                   audit: bool | Box = True, include_zero: bool = True,
                   nodes: int | None = None) -> Expansion:
    """Sum of ``-i Res(exp(-i t lam) R_V(lam) g, lam_j)`` over poles with ``Im lam_j > -A``.

    Eigenvalues ``i mu``, real resonances and complex resonances are all
    handled by the same contour residue. ``lam = 0`` is added when
    ``include_zero`` is set and it is not already among ``poles``.

    Parameters
    ----------
    audit : bool or Box
        Count zeros of the characteristic determinant in a box reaching
        down to ``Im lam = -A`` and compare with the supplied multiplicities.

    Raises
    ------
    IncompleteExpansionError
        The audit count differs from the supplied poles.
    """
    pts = _points(points)
    gamma = build_points(pts)
    Vm = _potential_matrix(V, len(pts))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    allp = _pole_list(poles)
    kept = [(lam, m) for lam, m in allp if lam.imag > -A]
    if include_zero and not any(abs(lam) < 1e-12 for lam, _ in kept):
        kept.append((0j, 1))
    if audit is not False and np.any(Vm):
        box = audit if isinstance(audit, Box) else audit_box(kept, A, Vm)
        expected = sum(m for lam, m in allp
                       if abs(lam) > 1e-12 and box.contains(np.array([lam]))[0])
        found = count_zeros(gamma, Vm, box)
        if found != expected:
            raise IncompleteExpansionError(
                f"{box.describe()} holds {found} resonances, {expected} supplied")
    lams = [lam for lam, _ in kept]
    total = np.zeros((len(t), len(x)), dtype=complex)
    terms = {}
    for lam, m in kept:
        term = -1j * residue_extract(gamma, Vm, lam, m, g, t, x, others=lams, nodes=nodes)
        terms[lam] = term
        total += term
    return Expansion(t, x, total, terms, kept, A)


# ------------------------------------------------------------- comparison

@dataclass
class ComparisonRow:
    t: float
    l2_error: float
    expansion_norm: float
    trajectory_norm: float

    @property
    def relative(self) -> float:
        return self.l2_error / self.trajectory_norm if self.trajectory_norm > 0 else math.inf


@dataclass
class ComparisonTable:
    rows: list
    chi_radius: float

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.rows])

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.l2_error for r in self.rows])

    @property
    def trajectory_norms(self) -> np.ndarray:
        return np.array([r.trajectory_norm for r in self.rows])

    @property
    def decay_rate(self) -> float:
        """``-d log(error) / dt`` by least squares; nan with fewer than two positive errors."""
        return -_log_slope(self.times, self.errors)

    @property
    def growth_rate(self) -> float:
        """``d log |u|_chi / dt`` by least squares."""
        return _log_slope(self.times, self.trajectory_norms)

    def non_increasing(self, slack: float = 0.1) -> bool:
        e = self.errors
        return bool(np.all(e[1:] <= (1.0 + slack) * e[:-1]))

    def to_csv(self, path_or_buf=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COMPARISON_COLUMNS)
        for r in self.rows:
            w.writerow([repr(float(r.t)), repr(float(r.l2_error)), repr(float(r.expansion_norm))])
        return _emit(buf.getvalue(), path_or_buf)


def _log_slope(t, v) -> float:
    m = np.asarray(v) > 0
    if m.sum() < 2:
        return math.nan
    return float(np.polyfit(np.asarray(t)[m], np.log(np.asarray(v)[m]), 1)[0])


def l2_norm(values, h: float) -> float:
    """Trapezoid L2 norm of grid values with spacing h."""
    v = np.abs(np.asarray(values)) ** 2
    if v.size < 2:
        return float(np.sqrt(h * v.sum()))
    return float(np.sqrt(h * (v.sum() - 0.5 * (v[0] + v[-1]))))


def compare_expansion(trajectory: Trajectory, expansion: Expansion | Callable, chi_radius: float,
                      times: Sequence[float] | None = None) -> ComparisonTable:
    """L2 error on ``|x| <= chi_radius`` between the trajectory and the expansion.

    ``expansion`` is an ``Expansion`` evaluated on the trajectory grid
    inside the window, or a callable ``(t, x) -> array (len(t), len(x))``.
    A RuntimeWarning is issued for times not beyond ``2 chi_radius``.
    """
    times = trajectory.times if times is None else np.asarray(times, dtype=float)
    if np.any(times <= 2.0 * chi_radius):
        warnings.warn(f"times <= {2 * chi_radius} lie before the causal threshold", RuntimeWarning,
                      stacklevel=2)
    m = np.abs(trajectory.x) <= chi_radius + 1e-12
    xw = trajectory.x[m]
    e = np.real(np.asarray(expansion(times, xw)))
    rows = []
    for k, s in enumerate(times):
        u = trajectory.at(s)[m]
        rows.append(ComparisonRow(float(s), l2_norm(u - e[k], trajectory.h),
                                  l2_norm(e[k], trajectory.h), l2_norm(u, trajectory.h)))
    return ComparisonTable(rows, chi_radius)


# ---------------------------------------------------------------- presets

@dataclass(frozen=True)
class WavePreset:
    """A ready-made wave experiment."""

    name: str
    points: tuple
    V: np.ndarray
    g: PiecewisePolynomial
    h: float
    cfl: float
    times: tuple
    chi_radius: float
    A: float
    search_box: Box | None


THREE_POINT_N = 160


def three_point_potential() -> np.ndarray:
    """Nearest-neighbour coupling of unit strength on three points."""
    return np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])


def preset(name: str, c: float | None = None, h: float | None = None,
           A: float | None = None) -> WavePreset:
    """Build one of ``single-well``, ``paper-three-point`` or ``free``.

    ``c`` is the single-well strength (default 2) and ``A`` the truncation
    depth of the expansion. The three-point default ``A = 0.6`` drops every
    complex pole, so the error is the decaying remainder; with larger A the
    error reaches the O(h^2) phase drift of the undamped modes at +-1.
    """
    bump = PiecewisePolynomial.bump(-0.4, 0.8)
    if name == "single-well":
        c = 2.0 if c is None else float(c)
        top = 1.0 + abs(c)
        A = 2.0 if A is None else float(A)
        return WavePreset(name, (0.0,), np.array([[c]]), bump, h or 1.0 / 1600, 0.9,
                          (6.0, 7.0, 8.0, 9.0, 10.0), 2.0, A, Box(-4.0, 4.0, -A, top))
    if name == "paper-three-point":
        h = h or (math.pi / 2) / THREE_POINT_N
        A = 0.6 if A is None else float(A)
        return WavePreset(name, (-math.pi / 2, 0.0, math.pi / 2), three_point_potential(), bump,
                          h, 0.9, tuple(np.arange(6.0, 12.01, 0.5)), 2.0, A,
                          Box(-20.0, 20.0, -A, 2.0))
    if name == "free":
        return WavePreset(name, (0.0,), np.zeros((1, 1)), PiecewisePolynomial.indicator(-1.0, 1.0),
                          h or 1.0 / 100, 1.0, (5.0, 6.0, 7.0), 2.0, 1.0, None)
    raise ValueError(f"unknown preset {name!r}; choose single-well, paper-three-point or free")


@dataclass
class DemoResult:
    preset: WavePreset
    trajectory: Trajectory
    poles: ResonanceSet
    expansion: Expansion
    table: ComparisonTable


def run_preset(p: WavePreset) -> DemoResult:
    """Evolve, locate poles above ``-A``, evaluate the expansion and compare."""
    traj = evolve(p.points, p.V, p.g, max(p.times), p.h, p.cfl, snapshot_times=p.times)
    gamma = build_points(p.points)
    if p.search_box is not None and np.any(p.V):
        poles = find_resonances(gamma, p.V, p.search_box)
    else:
        poles = ResonanceSet([], "", 0)
    m = np.abs(traj.x) <= p.chi_radius + 1e-12
    audit = p.search_box if p.search_box is not None else False
    exp = expansion_eval(p.points, p.V, p.g, traj.times, traj.x[m], poles, p.A, audit=audit)
    table = compare_expansion(traj, exp, p.chi_radius)
    return DemoResult(p, traj, poles, exp, table)
