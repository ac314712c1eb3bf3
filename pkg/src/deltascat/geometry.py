"""Quadrature discretizations of the support set Gamma.

A :class:`GammaDiscretization` is a flat list of nodes and surface-measure
weights together with per-patch metadata that the layer assembly uses to
pick a singular quadrature. Supported patches:

* ``points``        finite point sets in R^1 (counting measure)
* ``closed_curve``  smooth periodic curves in R^2 (trapezoid rule)
* ``open_curve``    open arcs in R^2 (composite Gauss-Legendre panels)
* ``sphere``        spheres in R^3 (Gauss-Legendre x uniform product grid)
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidGeometryError

PANEL_ORDER = 16
_HULL_SAMPLES = 4096


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Patch:
    """One smooth piece of Gamma occupying ``nodes[start:stop]``.

    ``data`` carries what the assembler needs: parameter values and speeds
    for curves, panel layout for open arcs, grid shape for spheres.
    """

    kind: str
    start: int
    stop: int
    convex: bool
    data: dict = field(default_factory=dict, compare=False)

    @property
    def size(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True)
class GammaDiscretization:
    dimension: int
    nodes: np.ndarray
    weights: np.ndarray
    patch_id: np.ndarray
    patches: tuple
    d_gamma: float

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise InvalidGeometryError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if self.nodes.ndim != 2 or self.nodes.shape[1] != self.dimension:
            raise InvalidGeometryError("nodes must have shape (N, d)")
        if len(self.weights) != len(self.nodes):
            raise InvalidGeometryError("one weight per node required")
        if np.any(self.weights <= 0):
            raise InvalidGeometryError("quadrature weights must be positive")

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def total_measure(self) -> float:
        return float(self.weights.sum())

    @property
    def convex(self) -> bool:
        """True when every patch is flagged strictly convex."""
        return all(p.convex for p in self.patches)

    def max_spacing(self) -> float:
        """Largest distance from a node to its nearest neighbour."""
        if self.n < 2:
            return 0.0
        d = _pairwise(self.nodes)
        np.fill_diagonal(d, np.inf)
        return float(d.min(axis=1).max())

    def describe(self) -> str:
        kinds = ",".join(p.kind for p in self.patches)
        return f"d={self.dimension} N={self.n} patches=[{kinds}] d_gamma={self.d_gamma:.6g}"


def _pairwise(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def hull_diameter(nodes) -> float:
    """Diameter of the convex hull of a point set.

    The hull diameter is attained at a pair of hull vertices, so the maximum
    pairwise distance over all points gives it directly. Evaluated in row
    blocks to keep memory at O(N * block).
    """
    x = np.asarray(nodes, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if len(x) == 0:
        raise InvalidGeometryError("hull_diameter needs at least one node")
    best = 0.0
    block = 512
    for i in range(0, len(x), block):
        diff = x[i:i + block, None, :] - x[None, :, :]
        best = max(best, float(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff).max())))
    return best


def _assemble(dimension: int, parts: Sequence[tuple]) -> GammaDiscretization:
    """Concatenate (kind, nodes, weights, convex, data, hull_points) tuples."""
    nodes, weights, pid, patches, hull = [], [], [], [], []
    start = 0
    for k, (kind, x, w, convex, data, hp) in enumerate(parts):
        x = np.asarray(x, dtype=float).reshape(len(w), dimension)
        nodes.append(x)
        weights.append(np.asarray(w, dtype=float))
        pid.append(np.full(len(w), k))
        patches.append(Patch(kind, start, start + len(w), bool(convex), data))
        hull.append(np.asarray(hp, dtype=float).reshape(-1, dimension))
        start += len(w)
    x = np.concatenate(nodes)
    return GammaDiscretization(
        dimension=dimension,
        nodes=_frozen(x),
        weights=_frozen(np.concatenate(weights)),
        patch_id=_frozen(np.concatenate(pid)).astype(int),
        patches=tuple(patches),
        d_gamma=hull_diameter(np.concatenate(hull)),
    )


def combine(*gammas: GammaDiscretization) -> GammaDiscretization:
    """Union of several discretizations of the same dimension.

    Patches are assumed disjoint; interactions between different patches
    use the plain product rule, which is accurate only when the patches are
    separated by more than a few node spacings.
    """
    if not gammas:
        raise InvalidGeometryError("combine needs at least one geometry")
    d = gammas[0].dimension
    parts = []
    for g in gammas:
        if g.dimension != d:
            raise InvalidGeometryError("cannot combine geometries of different dimension")
        for p in g.patches:
            sl = slice(p.start, p.stop)
            parts.append((p.kind, g.nodes[sl], g.weights[sl], p.convex, p.data,
                          p.data.get("hull_points", g.nodes[sl])))
    return _assemble(d, parts)


# --------------------------------------------------------------------- d = 1

def build_points(coords) -> GammaDiscretization:
    """Finite point set on the line with counting measure."""
    x = np.asarray(coords, dtype=float).ravel()
    if x.size == 0:
        raise InvalidGeometryError("at least one point is required")
    if len(np.unique(x)) != len(x):
        raise InvalidGeometryError("duplicate coordinates in point set")
    data = {"hull_points": x[:, None]}
    return _assemble(1, [("points", x[:, None], np.ones(len(x)), False, data, x[:, None])])


# --------------------------------------------------------------------- d = 2

def _periodic_derivative(values: np.ndarray) -> np.ndarray:
    """Spectral derivative in t of samples on the uniform grid 2*pi*k/n."""
    n = values.shape[0]
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        k[n // 2] = 0.0
    return np.real(np.fft.ifft(1j * k[:, None] * np.fft.fft(values, axis=0), axis=0))


def _closed_curve(param: Callable, n_nodes: int, convex: bool,
                  dparam: Callable | None = None, d2param: Callable | None = None):
    n2 = int(n_nodes) + (int(n_nodes) % 2)
    t = 2.0 * np.pi * np.arange(n2) / n2
    x = np.asarray(param(t), dtype=float).reshape(2, n2).T
    dx = (np.asarray(dparam(t), dtype=float).reshape(2, n2).T if dparam is not None
          else _periodic_derivative(x))
    ddx = (np.asarray(d2param(t), dtype=float).reshape(2, n2).T if d2param is not None
           else _periodic_derivative(dx))
    speed = np.hypot(dx[:, 0], dx[:, 1])
    if np.any(speed < 1e-12 * max(1.0, float(np.abs(x).max()))):
        raise InvalidGeometryError("degenerate parametrization: zero speed")
    ts = 2.0 * np.pi * np.arange(_HULL_SAMPLES) / _HULL_SAMPLES
    hull = np.asarray(param(ts), dtype=float).reshape(2, -1).T
    w = (2.0 * np.pi / n2) * speed
    data = {"t": t, "speed": speed, "tangent": dx, "second": ddx, "hull_points": hull}
    return ("closed_curve", x, w, convex, data, hull)


def _open_curve(param: Callable, dparam: Callable, n_nodes: int, convex: bool,
                panel_order: int = PANEL_ORDER):
    """Arc param(s), s in [0, 1], on equal composite Gauss-Legendre panels."""
    n_pan = max(1, math.ceil(int(n_nodes) / panel_order))
    gx, gw = np.polynomial.legendre.leggauss(panel_order)
    edges = np.linspace(0.0, 1.0, n_pan + 1)
    s = np.concatenate([edges[i] + (edges[i + 1] - edges[i]) * (gx + 1) / 2 for i in range(n_pan)])
    ws = np.concatenate([gw * (edges[i + 1] - edges[i]) / 2 for i in range(n_pan)])
    x = np.asarray(param(s), dtype=float).reshape(2, -1).T
    dx = np.asarray(dparam(s), dtype=float).reshape(2, -1).T
    speed = np.hypot(dx[:, 0], dx[:, 1])
    if np.any(speed < 1e-12):
        raise InvalidGeometryError("degenerate parametrization: zero speed")
    ss = np.linspace(0.0, 1.0, _HULL_SAMPLES + 1)
    hull = np.asarray(param(ss), dtype=float).reshape(2, -1).T
    data = {"s": s, "speed": speed, "edges": edges, "order": panel_order,
            "param": param, "dparam": dparam, "hull_points": hull}
    return ("open_curve", x, ws * speed, convex, data, hull)


def build_curve(kind: str, n_nodes: int, **params) -> GammaDiscretization:
    """Discretize a planar curve.

    Parameters
    ----------
    kind : {"segment", "circle", "ellipse", "custom"}
    n_nodes : int
        Requested node count (>= 8). Closed curves round up to an even
        count, open arcs to a whole number of Gauss panels.
    **params
        ``segment``: ``length`` (default 1), ``start`` (default origin),
        ``angle`` (radians, default 0).
        ``circle``: ``radius``, ``center``.
        ``ellipse``: ``a``, ``b``, ``center``.
        ``custom``: ``param`` callable t -> (x(t), y(t)), ``closed``
        (default True; open arcs are parametrized on [0, 1] and need
        ``dparam``), optional ``dparam``, ``d2param``, ``convex``.
    """
    if int(n_nodes) < 8:
        raise InvalidGeometryError("n_nodes must be at least 8")
    center = np.asarray(params.get("center", (0.0, 0.0)), dtype=float)
    if kind == "segment":
        length = float(params.get("length", 1.0))
        if length <= 0:
            raise InvalidGeometryError("segment length must be positive")
        p0 = np.asarray(params.get("start", (0.0, 0.0)), dtype=float)
        e = np.array([math.cos(params.get("angle", 0.0)), math.sin(params.get("angle", 0.0))])

        def param(s):
            s = np.asarray(s, dtype=float)
            return np.stack([p0[0] + length * e[0] * s, p0[1] + length * e[1] * s])

        def dparam(s):
            s = np.asarray(s, dtype=float)
            return np.stack([np.full_like(s, length * e[0]), np.full_like(s, length * e[1])])

        part = _open_curve(param, dparam, n_nodes, False)
        part[4]["flat"] = True
        return _assemble(2, [part])
    if kind in ("circle", "ellipse"):
        if kind == "circle":
            a = b = float(params.get("radius", 1.0))
        else:
            a, b = float(params["a"]), float(params["b"])
        if a <= 0 or b <= 0:
            raise InvalidGeometryError("radii must be positive")

        def param(t):
            return np.stack([center[0] + a * np.cos(t), center[1] + b * np.sin(t)])

        def dparam(t):
            return np.stack([-a * np.sin(t), b * np.cos(t)])

        def d2param(t):
            return np.stack([-a * np.cos(t), -b * np.sin(t)])

        return _assemble(2, [_closed_curve(param, n_nodes, True, dparam, d2param)])
    if kind == "custom":
        param = params["param"]
        convex = bool(params.get("convex", False))
        if params.get("closed", True):
            return _assemble(2, [_closed_curve(param, n_nodes, convex,
                                               params.get("dparam"), params.get("d2param"))])
        if "dparam" not in params:
            raise InvalidGeometryError("open custom arcs need dparam")
        return _assemble(2, [_open_curve(param, params["dparam"], n_nodes, convex)])
    raise InvalidGeometryError(f"unknown curve kind {kind!r}")


# --------------------------------------------------------------------- d = 3

def sphere_grid(n_nodes_target: int) -> tuple[int, int]:
    """(n_theta, n_phi) with n_phi = 2 n_theta and n_theta * n_phi ~ target."""
    nt = max(2, int(round(math.sqrt(n_nodes_target / 2.0))))
    return nt, 2 * nt


def build_sphere(radius: float = 1.0, n_nodes_target: int = 500,
                 center=(0.0, 0.0, 0.0)) -> GammaDiscretization:
    """Sphere with Gauss-Legendre nodes in cos(theta) and a uniform azimuth grid."""
    if n_nodes_target < 50:
        raise InvalidGeometryError("n_nodes_target must be at least 50")
    if radius <= 0:
        raise InvalidGeometryError("radius must be positive")
    center = np.asarray(center, dtype=float)
    nt, nph = sphere_grid(n_nodes_target)
    ct, wt = np.polynomial.legendre.leggauss(nt)
    theta = np.arccos(ct)
    phi = 2.0 * np.pi * np.arange(nph) / nph
    T, P = np.meshgrid(theta, phi, indexing="ij")
    x = radius * np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], -1).reshape(-1, 3)
    w = (np.outer(wt, np.full(nph, 2.0 * np.pi / nph)) * radius ** 2).ravel()
    axes = np.vstack([np.eye(3), -np.eye(3)]) * radius
    hull = np.vstack([x, axes]) + center
    data = {"radius": radius, "center": center, "n_theta": nt, "n_phi": nph,
            "theta": theta, "phi": phi, "hull_points": hull}
    return _assemble(3, [("sphere", x + center, w, True, data, hull)])


# ------------------------------------------------------------------- config

def _shape_nodes(shape: dict, wavenumber: float | None, per_wavelength: float) -> int:
    n = int(shape.get("n_nodes", 64))
    if wavenumber is None:
        return n
    kind = shape["kind"]
    if kind == "segment":
        size = float(shape.get("length", 1.0))
    elif kind == "circle":
        size = 2 * math.pi * float(shape.get("radius", 1.0))
    elif kind == "ellipse":
        a, b = float(shape["a"]), float(shape["b"])
        size = math.pi * (3 * (a + b) - math.sqrt((3 * a + b) * (a + 3 * b)))
    elif kind == "sphere":
        r = float(shape.get("radius", 1.0))
        # nodes per wavelength along a great circle, squared for the surface
        ring = per_wavelength * abs(wavenumber) * 2 * math.pi * r / (2 * math.pi)
        return max(n, int(math.ceil(ring ** 2 / 2)))
    else:
        return n
    return max(n, int(math.ceil(per_wavelength * abs(wavenumber) * size / (2 * math.pi))))


def geometry_from_config(cfg: dict, wavenumber: float | None = None,
                         nodes_per_wavelength: float | None = None) -> GammaDiscretization:
    """Build a discretization from a declarative config dictionary.

    Schema::

        {"dimension": 1 | 2 | 3,
         "shapes": [{"kind": ..., <parameters>, "n_nodes": int, "convex": bool}],
         "nodes_per_wavelength": float   # optional, default 6
        }

    ``kind`` is ``points`` (with ``coords``), ``segment``, ``circle``,
    ``ellipse`` or ``sphere``. When ``wavenumber`` is given, node counts are
    raised so that every shape carries at least ``nodes_per_wavelength``
    nodes per wavelength 2*pi/|wavenumber|.
    """
    if not isinstance(cfg, dict) or "shapes" not in cfg or "dimension" not in cfg:
        raise InvalidGeometryError("geometry config needs 'dimension' and 'shapes'")
    d = int(cfg["dimension"])
    ppw = float(nodes_per_wavelength or cfg.get("nodes_per_wavelength", 6.0))
    built = []
    for shape in cfg["shapes"]:
        if not isinstance(shape, dict) or "kind" not in shape:
            raise InvalidGeometryError(f"malformed shape entry {shape!r}")
        kind = shape["kind"]
        n = _shape_nodes(shape, wavenumber, ppw)
        if kind == "points":
            if d != 1:
                raise InvalidGeometryError("point sets are supported in dimension 1 only")
            g = build_points(shape["coords"])
        elif kind in ("segment", "circle", "ellipse"):
            if d != 2:
                raise InvalidGeometryError(f"{kind} requires dimension 2")
            params = {k: v for k, v in shape.items() if k not in ("kind", "n_nodes", "convex")}
            g = build_curve(kind, n, **params)
        elif kind == "sphere":
            if d != 3:
                raise InvalidGeometryError("sphere requires dimension 3")
            g = build_sphere(float(shape.get("radius", 1.0)), n, shape.get("center", (0, 0, 0)))
        else:
            raise InvalidGeometryError(f"unknown shape kind {kind!r}")
        if "convex" in shape:
            g = _with_convexity(g, bool(shape["convex"]))
        built.append(g)
    if not built:
        raise InvalidGeometryError("geometry config has no shapes")
    return built[0] if len(built) == 1 else combine(*built)


def _with_convexity(g: GammaDiscretization, convex: bool) -> GammaDiscretization:
    patches = tuple(Patch(p.kind, p.start, p.stop, convex, p.data) for p in g.patches)
    return GammaDiscretization(g.dimension, g.nodes, g.weights, g.patch_id, patches, g.d_gamma)


def load_geometry_config(path) -> dict:
    try:
        with open(Path(path)) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidGeometryError(f"cannot parse geometry file {path}: {exc}") from exc
    # validate eagerly so malformed files fail before any computation
    geometry_from_config(cfg)
    return cfg


def load_geometry(path, wavenumber: float | None = None) -> GammaDiscretization:
    return geometry_from_config(load_geometry_config(path), wavenumber)
