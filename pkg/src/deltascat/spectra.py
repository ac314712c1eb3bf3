"""Operator-norm sweeps, decay fits, Schur bounds and restriction norms."""

from __future__ import annotations

import csv
import io
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DeltaScatError, InvalidGeometryError
from .geometry import GammaDiscretization, geometry_from_config
from .layer import DEFAULT_QUAD_DEPTH, LayerMatrix, assemble, operator_norm

SWEEP_COLUMNS = ("lambda_re", "lambda_im", "norm", "schur", "nodes", "seconds")
MIN_NODES_PER_WAVELENGTH = 6.0


@dataclass
class SweepRow:
    lam: complex
    norm: float
    schur: float
    nodes: int
    seconds: float
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class NormSweepTable:
    """One row per spectral parameter, in input order."""

    rows: list = field(default_factory=list)
    geometry: str = ""

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([r.lam for r in self.rows], dtype=complex)

    @property
    def norms(self) -> np.ndarray:
        return np.array([r.norm for r in self.rows], dtype=float)

    @property
    def schur(self) -> np.ndarray:
        return np.array([r.schur for r in self.rows], dtype=float)

    @property
    def failed(self) -> list:
        return [r for r in self.rows if not r.ok]

    def schur_dominates(self, rtol: float = 1e-8) -> bool:
        good = [r for r in self.rows if r.ok]
        return all(r.norm <= r.schur * (1.0 + rtol) for r in good)

    def to_csv(self, path_or_buf=None, timing: bool = False) -> str:
        """Write the table as CSV; returns the text.

        With ``timing=False`` the ``seconds`` column holds ``nan`` so that
        reruns are byte-identical.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r.lam.real), _fmt(r.lam.imag), _fmt(r.norm), _fmt(r.schur),
                        r.nodes, _fmt(r.seconds) if timing else "nan"])
        text = buf.getvalue()
        if path_or_buf is not None:
            _write_text(path_or_buf, text)
        return text


def _fmt(v: float) -> str:
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def _write_text(target, text: str) -> None:
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", newline="") as fh:
            fh.write(text)


def read_sweep_csv(path) -> NormSweepTable:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(SweepRow(complex(float(rec["lambda_re"]), float(rec["lambda_im"])),
                                 float(rec["norm"]), float(rec["schur"]), int(rec["nodes"]),
                                 float(rec["seconds"])))
    return NormSweepTable(rows)


# ----------------------------------------------------------------- helpers

def dyadic(a: float, b: float) -> np.ndarray:
    """a, 2a, 4a, ... up to b inclusive."""
    if a <= 0 or b < a:
        raise ValueError("dyadic grid needs 0 < a <= b")
    k = int(math.floor(math.log2(b / a) + 1e-12))
    return a * 2.0 ** np.arange(k + 1)


def parse_grid(text: str) -> np.ndarray:
    """Parse ``A:B:dyadic`` or ``A:B:linear:N`` into an array."""
    parts = text.split(":")
    try:
        if len(parts) == 3 and parts[2] == "dyadic":
            return dyadic(float(parts[0]), float(parts[1]))
        if len(parts) == 4 and parts[2] == "linear":
            return np.linspace(float(parts[0]), float(parts[1]), int(parts[3]))
    except ValueError as exc:
        raise ValueError(f"bad grid {text!r}: {exc}") from None
    raise ValueError(f"bad grid {text!r}; expected A:B:dyadic or A:B:linear:N")


def nodes_per_wavelength(gamma: GammaDiscretization, lam) -> float:
    """Smallest per-patch sampling density in nodes per wavelength."""
    k = abs(complex(lam))
    if gamma.dimension == 1 or k == 0:
        return math.inf
    worst = math.inf
    for p in gamma.patches:
        measure = float(gamma.weights[p.start:p.stop].sum())
        if gamma.dimension == 2:
            wavelengths = k * measure / (2 * math.pi)
            worst = min(worst, p.size / wavelengths)
        else:
            wavelengths2 = (k / (2 * math.pi)) ** 2 * measure
            worst = min(worst, math.sqrt(p.size / wavelengths2))
    return worst


def check_resolution(gamma: GammaDiscretization, lam, minimum=MIN_NODES_PER_WAVELENGTH) -> bool:
    ppw = nodes_per_wavelength(gamma, lam)
    if ppw < minimum:
        warnings.warn(f"under-resolved: {ppw:.2f} nodes per wavelength at lambda={complex(lam)} "
                      f"(minimum {minimum:g})", RuntimeWarning, stacklevel=3)
        return False
    return True


# ------------------------------------------------------------------- Schur

def schur_from_matrix(layer: LayerMatrix) -> float:
    """Weighted Schur bound ``sqrt(max row sum * max column sum)`` of the
    discrete operator, with test vector ``sqrt(w)``.

    Row sums are ``sum_k |A_jk|``, the discrete ``sup_x int |G0(x, y)| dsigma(y)``;
    column sums are ``sum_j |A_jk| w_j / w_k``. The bound dominates the
    weighted 2-norm by the Schur test.
    """
    absa = np.abs(layer.entries)
    w = layer.weights
    row = absa.sum(axis=1).max()
    col = ((absa * w[:, None]).sum(axis=0) / w).max()
    return float(math.sqrt(row * col))


def schur_bound(gamma: GammaDiscretization, lam, quad_depth: int = DEFAULT_QUAD_DEPTH) -> float:
    return schur_from_matrix(assemble(gamma, lam, quad_depth))


# ------------------------------------------------------------------- sweep

GeometrySource = GammaDiscretization | dict | Callable


def _resolve_geometry(source, lam) -> GammaDiscretization:
    if isinstance(source, GammaDiscretization):
        check_resolution(source, lam)
        return source
    if isinstance(source, dict):
        return geometry_from_config(source, wavenumber=abs(complex(lam)))
    if callable(source):
        return source(lam)
    raise InvalidGeometryError(f"cannot build geometry from {type(source).__name__}")


def _sweep_row(source, lam, method, quad_depth) -> SweepRow:
    t0 = time.perf_counter()
    try:
        gamma = _resolve_geometry(source, lam)
        layer = assemble(gamma, lam, quad_depth)
        norm = operator_norm(layer, method=method)
        schur = schur_from_matrix(layer)
        return SweepRow(complex(lam), norm, schur, gamma.n, time.perf_counter() - t0)
    except (DeltaScatError, ValueError, np.linalg.LinAlgError) as exc:
        return SweepRow(complex(lam), math.nan, math.nan, 0, time.perf_counter() - t0,
                        error=f"{type(exc).__name__}: {exc}")


def norm_sweep(source: GeometrySource, lams: Iterable, threads: int = 1,
               method: str = "power", quad_depth: int = DEFAULT_QUAD_DEPTH) -> NormSweepTable:
    """Operator norm and Schur bound of ``G(lam)`` for each ``lam``.

    Parameters
    ----------
    source : GammaDiscretization, dict or callable
        A fixed discretization (resolution is checked and warned about),
        a geometry config (rebuilt per ``lam`` at the resolution rule), or
        a callable ``lam -> GammaDiscretization``.
    lams : iterable of complex
    threads : int
        Rows are evaluated concurrently; output order follows the input.

    Failed rows are kept with ``nan`` values and an ``error`` message.
    """
    lams = [complex(v) for v in lams]
    desc = source.describe() if isinstance(source, GammaDiscretization) else str(source)
    if threads > 1 and len(lams) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda v: _sweep_row(source, v, method, quad_depth), lams))
    else:
        rows = [_sweep_row(source, v, method, quad_depth) for v in lams]
    return NormSweepTable(rows, desc)


# --------------------------------------------------------------------- fit

@dataclass(frozen=True)
class DecayFit:
    """Power-law fit ``log ||G|| = alpha log lam + c``.

    ``alpha_log`` and ``log_coefficient`` come from the joint fit
    ``alpha log lam + beta log log lam + c``; ``log_correction_flag`` is set
    when adding the log regressor reduces the residual by more than half.
    """

    alpha: float
    residual: float
    alpha_log: float
    log_coefficient: float
    residual_log: float
    n_points: int

    @property
    def log_correction_flag(self) -> bool:
        return self.residual_log < 0.5 * self.residual


def fit_decay_exponent(table_or_x, norms=None, lam_range: tuple | None = None,
                       axis: str = "abs") -> DecayFit:
    """Least-squares decay exponent of the norm against the spectral parameter.

    Parameters
    ----------
    table_or_x : NormSweepTable or array_like
        A sweep table, or abscissae when ``norms`` is given.
    lam_range : (lo, hi), optional
        Keep rows whose abscissa lies in ``[lo, hi]``.
    axis : {"abs", "real", "imag"}
        Abscissa used for a table: ``|lam|``, ``Re lam`` or ``Im lam``.
    """
    if norms is None:
        rows = [r for r in table_or_x.rows if r.ok]
        lam = np.array([r.lam for r in rows], dtype=complex)
        y = np.array([r.norm for r in rows], dtype=float)
        x = {"abs": np.abs(lam), "real": lam.real, "imag": lam.imag}[axis]
    else:
        x = np.asarray(table_or_x, dtype=float)
        y = np.asarray(norms, dtype=float)
    if lam_range is not None:
        keep = (x >= lam_range[0]) & (x <= lam_range[1])
        x, y = x[keep], y[keep]
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    x, y = x[keep], y[keep]
    if len(x) < 4:
        raise ValueError(f"need at least 4 usable rows for a decay fit, got {len(x)}")
    lx, ly = np.log(x), np.log(y)
    a1 = np.column_stack([lx, np.ones_like(lx)])
    c1, *_ = np.linalg.lstsq(a1, ly, rcond=None)
    res1 = float(np.linalg.norm(a1 @ c1 - ly))
    if np.all(x > 1.0):
        a2 = np.column_stack([lx, np.log(lx), np.ones_like(lx)])
        c2, *_ = np.linalg.lstsq(a2, ly, rcond=None)
        res2 = float(np.linalg.norm(a2 @ c2 - ly))
        alpha_log, beta = float(c2[0]), float(c2[1])
    else:
        alpha_log, beta, res2 = math.nan, math.nan, math.nan
    return DecayFit(float(c1[0]), res1, alpha_log, beta, res2, len(x))


# --------------------------------------------------------- growth checks

@dataclass
class GrowthReport:
    x: np.ndarray
    lams: np.ndarray
    norms: np.ndarray
    ratios: np.ndarray

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios))

    @property
    def spread(self) -> float:
        """max / median of the ratios; large values signal runaway growth."""
        return float(np.max(self.ratios) / np.median(self.ratios))

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.ratios)) and self.spread < 10.0)


def lower_half_growth(source: GeometrySource, xs: Sequence[float], beta: float,
                      d_gamma: float | None = None, quad_depth: int = DEFAULT_QUAD_DEPTH,
                      threads: int = 1) -> GrowthReport:
    """Norms along ``lam = x - i beta log x`` against ``x^{-1/2} log x e^{d beta log x}``."""
    xs = np.asarray(xs, dtype=float)
    lams = xs - 1j * beta * np.log(xs)
    table = norm_sweep(source, lams, threads=threads, quad_depth=quad_depth)
    if table.failed:
        raise DeltaScatError(f"growth sweep failed: {table.failed[0].error}")
    if d_gamma is None:
        d_gamma = _resolve_geometry(source, lams[0]).d_gamma
    model = xs ** -0.5 * np.log(xs) * np.exp(d_gamma * beta * np.log(xs))
    return GrowthReport(xs, lams, table.norms, table.norms / model)


# ------------------------------------------------------------- restriction

def restriction_matrix(gamma: GammaDiscretization, r: float, m_nodes: int | None = None) -> np.ndarray:
    """``T_jm = exp(i x_j . xi_m) sqrt(v_m) sqrt(w_j)`` with ``xi_m`` on the circle of radius r."""
    if gamma.dimension != 2:
        raise InvalidGeometryError("restriction norms are implemented for d = 2")
    if r <= 0:
        raise ValueError("radius must be positive")
    m = m_nodes if m_nodes is not None else max(64, int(math.ceil(12 * r)))
    if m < 6 * r:
        raise ValueError(f"circle of radius {r} under-resolved by {m} nodes (need >= {6 * r:.0f})")
    a = 2.0 * np.pi * np.arange(m) / m
    xi = r * np.column_stack([np.cos(a), np.sin(a)])
    v = np.full(m, 2.0 * np.pi * r / m)
    return np.exp(1j * (gamma.nodes @ xi.T)) * np.sqrt(v)[None, :] * np.sqrt(gamma.weights)[:, None]


def restriction_norm(gamma: GammaDiscretization, r: float, m_nodes: int | None = None) -> float:
    """Norm of ``g -> (extension of g from the circle |xi| = r) restricted to Gamma``.

    The square estimates the best constant in ``||g_hat||_{L2(Gamma)}^2 <= C <r>^alpha ||g||^2``.
    """
    return float(np.linalg.norm(restriction_matrix(gamma, r, m_nodes), 2))
