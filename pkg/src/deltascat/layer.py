"""Nystrom discretization of the single layer operator G(lam) on Gamma.

The assembled matrix ``A`` acts on node values: ``(A f)_j`` approximates
``int_Gamma G0(lam, x_j, y) f(y) dsigma(y)``. Off the singular set ``A`` is
``G0(lam, |x_j - x_k|) w_k``; the singular part is handled per patch:

* points (d = 1): exact kernel, diagonal ``i/(2 lam)``.
* closed curves: Kress product quadrature splitting off ``log(4 sin^2((t-s)/2))``.
* open arcs: product integration against each panel's Lagrange basis on
  dyadically graded subintervals for the self and adjacent panels.
* spheres: rotated-pole quadrature. The density is interpolated by spherical
  harmonics and integrated on a grid whose pole sits at the target node,
  where the Jacobian cancels the ``1/r`` singularity.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.special as sps

from .errors import ConvergenceError, InvalidGeometryError
from .geometry import GammaDiscretization, Patch
from .greens import ComplexFrequency, as_frequency, bessel_j0, green_kernel, hankel1_pair

DEFAULT_QUAD_DEPTH = 4
_EULER = 0.57721566490153286061


@dataclass(frozen=True)
class LayerMatrix:
    """Assembled single layer operator.

    Attributes
    ----------
    lam : ComplexFrequency
    entries : ndarray, shape (N, N)
        ``A`` acting on node values, weights included.
    weights : ndarray, shape (N,)
    dimension : int
    scheme : str
        Singular quadrature used, one label per patch joined by ``+``.
    """

    lam: ComplexFrequency
    entries: np.ndarray
    weights: np.ndarray
    dimension: int
    scheme: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def kernel(self) -> np.ndarray:
        """Unweighted kernel ``K_jk = A_jk / w_k``."""
        return self.entries / self.weights[None, :]

    def weighted(self) -> np.ndarray:
        """``W^{1/2} K W^{1/2}``, whose 2-norm is the L2(Gamma) operator norm."""
        s = np.sqrt(self.weights)
        return s[:, None] * self.entries / s[None, :]


# --------------------------------------------------------------- potential

@dataclass(frozen=True)
class PotentialSpec:
    """Bounded self-adjoint potential V on L2(Gamma), acting on node values.

    Exactly one of the forms is used: a constant ``scalar`` (V = c I),
    per-node ``diagonal`` samples, or a full ``matrix``.
    """

    scalar: float | complex | None = None
    diagonal: np.ndarray | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        given = sum(x is not None for x in (self.scalar, self.diagonal, self.matrix))
        if given != 1:
            raise ValueError("PotentialSpec needs exactly one of scalar, diagonal, matrix")

    @classmethod
    def constant(cls, c) -> "PotentialSpec":
        return cls(scalar=c)

    @classmethod
    def from_matrix(cls, m) -> "PotentialSpec":
        m = np.array(m, dtype=complex if np.iscomplexobj(m) else float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("potential matrix must be square")
        return cls(matrix=m)

    @classmethod
    def from_samples(cls, v) -> "PotentialSpec":
        return cls(diagonal=np.asarray(v).ravel())

    @property
    def is_zero(self) -> bool:
        for x in (self.scalar, self.diagonal, self.matrix):
            if x is not None:
                return not np.any(np.asarray(x))
        return True

    @property
    def is_real(self) -> bool:
        for x in (self.scalar, self.diagonal, self.matrix):
            if x is not None:
                return bool(np.all(np.imag(np.asarray(x)) == 0))
        return True

    def as_matrix(self, n: int) -> np.ndarray:
        if self.scalar is not None:
            return self.scalar * np.eye(n)
        if self.diagonal is not None:
            if len(self.diagonal) != n:
                raise ValueError(f"potential has {len(self.diagonal)} samples, geometry has {n} nodes")
            return np.diag(self.diagonal)
        if self.matrix.shape[0] != n:
            raise ValueError(f"potential is {self.matrix.shape[0]}x{self.matrix.shape[0]}, geometry has {n} nodes")
        return self.matrix.copy()

    def self_adjoint_defect(self, weights) -> float:
        """Relative size of ``W V - V^* W``; zero for a self-adjoint V."""
        w = np.asarray(weights, dtype=float)
        v = self.as_matrix(len(w))
        wv = w[:, None] * v
        scale = max(np.abs(wv).max(), 1e-300)
        return float(np.abs(wv - wv.conj().T).max() / scale)

    def check_self_adjoint(self, weights, tol: float = 1e-12) -> None:
        defect = self.self_adjoint_defect(weights)
        if defect > tol:
            raise ValueError(f"potential is not self-adjoint on weighted l2 (defect {defect:.2e})")


# ---------------------------------------------------------------- assembly

def _distances(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - y[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _plain_block(d, lam, x, y, wy):
    r = _distances(x, y)
    return green_kernel(d, lam, r) * wy[None, :]


def _points_block(lam, x):
    r = _distances(x, x)
    return green_kernel(1, lam, r)


def _kress_block(lam, x, patch: Patch):
    """Kress log-split quadrature on a closed curve with 2n equispaced nodes."""
    t = patch.data["t"]
    speed = patch.data["speed"]
    n2 = len(t)
    n = n2 // 2
    r = _distances(x, x)
    off = ~np.eye(n2, dtype=bool)
    r_off = np.where(off, r, 1.0)
    z = lam * r_off
    h0 = hankel1_pair(z)[0]
    j0 = bessel_j0(z)
    m_full = 0.25j * h0 * speed[None, :]
    m1 = -j0 * speed[None, :] / (4.0 * np.pi)
    dt = t[:, None] - t[None, :]
    log_term = np.zeros_like(r)
    log_term[off] = np.log(4.0 * np.sin(0.5 * dt[off]) ** 2)
    m2 = m_full - m1 * log_term
    m1[~off] = -speed / (4.0 * np.pi)
    m2[~off] = (0.25j - _EULER / (2 * np.pi) - np.log(lam * speed / 2.0) / (2 * np.pi)) * speed
    mm = np.arange(1, n)
    tj = np.pi * np.arange(n2) / n
    rw = (-2.0 * np.pi / n) * (np.cos(np.outer(tj, mm)) / mm).sum(axis=1) \
        - (np.pi / n ** 2) * np.cos(n * tj)
    idx = np.abs(np.arange(n2)[:, None] - np.arange(n2)[None, :])
    return rw[idx] * m1 + (np.pi / n) * m2


def _graded_rule(lo, hi, depth, gx, gw):
    """Nodes and weights on [lo, hi] (arrays) graded toward ``lo``.

    Dyadic levels shrink toward ``lo``; the innermost level uses the
    substitution s = e u^3, which makes the log singularity smooth.
    """
    length = hi - lo
    u = 0.5 * (gx + 1.0)
    wu = 0.5 * gw
    nodes, weights = [], []
    e1 = 0.5 ** depth
    nodes.append(e1 * u ** 3)
    weights.append(wu * 3.0 * e1 * u ** 2)
    for k in range(depth):
        a, b = 0.5 ** (depth - k), 0.5 ** (depth - k - 1)
        nodes.append(a + (b - a) * u)
        weights.append((b - a) * wu)
    s = np.concatenate(nodes)
    ws = np.concatenate(weights)
    return lo[:, None] + length[:, None] * s[None, :], np.abs(length)[:, None] * ws[None, :]


def _lagrange_matrix(nodes, bw, x):
    """Values at ``x`` (shape (P, Q)) of the Lagrange basis on ``nodes`` (shape (P, n))."""
    diff = x[:, :, None] - nodes[:, None, :]
    hit = diff == 0
    diff = np.where(hit, 1.0, diff)
    m = bw[None, None, :] / diff
    m = m / m.sum(axis=2, keepdims=True)
    rows = hit.any(axis=2)
    if rows.any():
        m[rows] = hit[rows].astype(float)
    return m


def _panel_block(lam, x, patch: Patch, depth: int):
    data = patch.data
    order = data["order"]
    edges = data["edges"]
    s_nodes = data["s"]
    param, dparam = data["param"], data["dparam"]
    n = len(s_nodes)
    n_pan = n // order
    gx, gw = np.polynomial.legendre.leggauss(order)
    speed = data["speed"]
    w = np.concatenate([gw * (edges[i + 1] - edges[i]) / 2 for i in range(n_pan)]) * speed
    r = _distances(x, x)
    # the diagonal is overwritten by the self-panel rule below
    a = green_kernel(2, lam, np.where(r > 0, r, 1.0)) * w[None, :]
    # barycentric weights of the reference Gauss nodes (same on every panel)
    bw = np.array([1.0 / np.prod([gx[j] - gx[k] for k in range(order) if k != j]) for j in range(order)])
    targets, panels = [], []
    for i in range(n):
        p = i // order
        for q in range(max(0, p - 1), min(n_pan, p + 2)):
            targets.append(i)
            panels.append(q)
    targets = np.array(targets)
    panels = np.array(panels)
    lo = edges[panels]
    hi = edges[panels + 1]
    sing = np.clip(s_nodes[targets], lo, hi)
    left_s, left_w = _graded_rule(sing, lo, depth, gx, gw)
    right_s, right_w = _graded_rule(sing, hi, depth, gx, gw)
    qs = np.concatenate([left_s, right_s], axis=1)
    qw = np.concatenate([left_w, right_w], axis=1)
    flat = qs.ravel()
    pts = np.asarray(param(flat), dtype=float).reshape(2, -1).T.reshape(qs.shape + (2,))
    dpt = np.asarray(dparam(flat), dtype=float).reshape(2, -1).T.reshape(qs.shape + (2,))
    jac = np.hypot(dpt[..., 0], dpt[..., 1])
    rr = np.hypot(pts[..., 0] - x[targets, 0][:, None], pts[..., 1] - x[targets, 1][:, None])
    kern = np.zeros(qs.shape, dtype=complex)
    good = (rr > 0) & (qw > 0)
    kern[good] = green_kernel(2, lam, rr[good]) * (qw * jac)[good]
    # reference coordinates of quadrature points within each panel
    ref = 2.0 * (qs - lo[:, None]) / (hi - lo)[:, None] - 1.0
    lag = _lagrange_matrix(np.broadcast_to(gx, (len(targets), order)), bw, ref)
    vals = np.einsum("pq,pqk->pk", kern, lag)
    for idx, (i, q) in enumerate(zip(targets, panels)):
        a[i, q * order:(q + 1) * order] = vals[idx]
    return a


def _sph_harmonics(lmax: int, theta, phi) -> np.ndarray:
    out = []
    for ell in range(lmax + 1):
        for m in range(-ell, ell + 1):
            out.append(sps.sph_harm_y(ell, m, theta, phi))
    return np.array(out)


def _sphere_block(lam, patch: Patch, depth: int):
    """Rotated-pole quadrature on a Gauss x uniform sphere grid."""
    data = patch.data
    radius = data["radius"]
    theta, phi = data["theta"], data["phi"]
    nt, nph = len(theta), len(phi)
    lmax = min(nt - 1, (nph - 1) // 2)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    ct, wt = np.polynomial.legendre.leggauss(nt)
    w_unit = np.outer(wt, np.full(nph, 2.0 * np.pi / nph)).ravel()
    proj = np.conj(_sph_harmonics(lmax, tt.ravel(), pp.ravel())) * w_unit[None, :]
    # oversampled grid around the pole: Gauss in theta' on [0, pi], uniform in phi'
    over = max(2, depth // 2)
    u, wu = np.polynomial.legendre.leggauss(over * nt)
    tq = 0.5 * np.pi * (u + 1.0)
    wtq = 0.5 * np.pi * wu
    nq_p = over * nph
    pq = 2.0 * np.pi * np.arange(nq_p) / nq_p
    TQ, PQ = np.meshgrid(tq, pq, indexing="ij")
    # G0 * R^2 sin(theta') with |x - y| = 2R sin(theta'/2)
    kern = np.exp(2j * lam * radius * np.sin(TQ / 2)) * np.cos(TQ / 2) * radius / (4.0 * np.pi)
    wq = (kern * wtq[:, None] * (2.0 * np.pi / nq_p)).ravel()
    vq = np.stack([np.sin(TQ) * np.cos(PQ), np.sin(TQ) * np.sin(PQ), np.cos(TQ)], -1).reshape(-1, 3)
    ms = np.array([m for ell in range(lmax + 1) for m in range(-ell, ell + 1)])
    phase = np.exp(1j * np.outer(phi, ms))
    a = np.empty((nt * nph, nt * nph), dtype=complex)
    for i in range(nt):
        c, s = math.cos(theta[i]), math.sin(theta[i])
        rot = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
        y = vq @ rot.T
        ty = np.arccos(np.clip(y[:, 2], -1.0, 1.0))
        py = np.arctan2(y[:, 1], y[:, 0])
        v = _sph_harmonics(lmax, ty, py) @ wq
        a[i * nph:(i + 1) * nph] = (phase * v[None, :]) @ proj
    return a


def _subtraction_block(lam, x, w, self_integral):
    """Singularity subtraction: diagonal from a known integral of 1/(4 pi r)."""
    r = _distances(x, x)
    np.fill_diagonal(r, 1.0)
    a = green_kernel(3, lam, r) * w[None, :]
    s = w[None, :] / (4.0 * np.pi * r)
    np.fill_diagonal(a, 0.0)
    np.fill_diagonal(s, 0.0)
    a[np.diag_indices_from(a)] = w * 1j * lam / (4.0 * np.pi) + self_integral - s.sum(axis=1)
    return a


def assemble(gamma: GammaDiscretization, lam, quad_depth: int = DEFAULT_QUAD_DEPTH,
             sphere_scheme: str = "rotated") -> LayerMatrix:
    """Assemble the Nystrom matrix of ``G(lam)`` on ``gamma``.

    Parameters
    ----------
    gamma : GammaDiscretization
    lam : complex or ComplexFrequency
        Spectral parameter on the principal branch, ``|lam| >= 1e-6``.
    quad_depth : int
        Dyadic grading depth for open arcs; also sets the oversampling of
        the rotated sphere grid.
    sphere_scheme : {"rotated", "subtraction"}
        Self-interaction scheme on spheres. ``subtraction`` is lower order
        and is kept as an independent cross-check.
    """
    freq = as_frequency(lam, gamma.dimension)
    k = freq.value
    d = gamma.dimension
    n = gamma.n
    x = np.asarray(gamma.nodes)
    w = np.asarray(gamma.weights)
    a = np.empty((n, n), dtype=complex)
    labels = []
    for p in gamma.patches:
        sp_ = slice(p.start, p.stop)
        xp = x[sp_]
        if p.kind == "points":
            block = _points_block(k, xp)
            labels.append("exact")
        elif p.kind == "closed_curve":
            block = _kress_block(k, xp, p)
            labels.append("kress")
        elif p.kind == "open_curve":
            block = _panel_block(k, xp, p, quad_depth)
            labels.append(f"graded{quad_depth}")
        elif p.kind == "sphere":
            if sphere_scheme == "rotated":
                block = _sphere_block(k, p, quad_depth)
            elif sphere_scheme == "subtraction":
                block = _subtraction_block(k, xp, w[sp_], p.data["radius"])
            else:
                raise ValueError(f"unknown sphere scheme {sphere_scheme!r}")
            labels.append(sphere_scheme)
        else:
            raise InvalidGeometryError(f"unknown patch kind {p.kind!r}")
        a[sp_, sp_] = block
        for q in gamma.patches:
            if q is p:
                continue
            sq = slice(q.start, q.stop)
            a[sp_, sq] = _plain_block(d, k, xp, x[sq], w[sq])
    return LayerMatrix(freq, a, w.copy(), d, "+".join(labels), {"quad_depth": quad_depth})


def apply(layer: LayerMatrix, f) -> np.ndarray:
    """Matrix-vector product ``A f`` on node values."""
    f = np.asarray(f)
    if f.shape[0] != layer.n:
        raise ValueError(f"expected {layer.n} node values, got {f.shape[0]}")
    return layer.entries @ f


def operator_norm(layer: LayerMatrix, method: str = "power", tol: float = 1e-8,
                  max_iter: int = 10_000, block: int = 6) -> float:
    """L2(Gamma) operator norm, the top singular value of ``W^{1/2} K W^{1/2}``.

    ``method="power"`` runs block power iteration (``block`` vectors,
    Rayleigh-Ritz on each step) on the normal matrix from a fixed
    deterministic start, and stops once the top Ritz pair is an eigenpair of
    the normal matrix to relative residual ``tol``. The block keeps clustered
    top singular values from stalling the iteration. ``method="svd"`` is the
    dense reference.
    """
    b = layer.weighted()
    if method == "svd":
        return float(np.linalg.svd(b, compute_uv=False)[0])
    if method != "power":
        raise ValueError(f"unknown method {method!r}")
    n = layer.n
    k = min(n, block)
    # all-ones plus fixed ramps: all-ones alone is an exact singular vector
    # of rotation-invariant discretizations and would hide the top mode
    j = np.arange(n)
    v = np.column_stack([np.ones(n) + 0.5 * np.cos(j * 2.399963 * (m + 1)) for m in range(k)])
    v, _ = np.linalg.qr(v.astype(complex))
    bh = b.conj().T
    est = 0.0
    trace = []
    for _ in range(max_iter):
        z = bh @ (b @ v)
        theta, s = np.linalg.eigh(v.conj().T @ z)
        rho = float(theta[-1])
        if rho <= 0:
            return 0.0
        est = math.sqrt(rho)
        trace.append(est)
        if np.linalg.norm(z @ s[:, -1] - rho * (v @ s[:, -1])) <= tol * rho:
            return est
        v, _ = np.linalg.qr(z)
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps", last=est, trace=trace)


# ------------------------------------------------------------ binary dump

_HEADER = struct.Struct("<iidd")


def dump_matrix(path, layer: LayerMatrix) -> None:
    """Write ``entries`` as: int32 d, int32 N, float64 Re lam, float64 Im lam,
    then N*N little-endian complex128 values in row-major order."""
    lam = layer.lam.value
    with open(Path(path), "wb") as fh:
        fh.write(_HEADER.pack(layer.dimension, layer.n, lam.real, lam.imag))
        fh.write(np.ascontiguousarray(layer.entries, dtype="<c16").tobytes())


def load_matrix(path):
    """Inverse of :func:`dump_matrix`; returns ``(d, lam, entries)``."""
    raw = Path(path).read_bytes()
    d, n, re, im = _HEADER.unpack_from(raw)
    data = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size)
    if data.size != n * n:
        raise ValueError(f"truncated matrix file: expected {n * n} entries, found {data.size}")
    return d, complex(re, im), data.reshape(n, n).astype(complex)
