import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from deltascat.errors import InvalidGeometryError
from deltascat.geometry import (build_curve, build_points, build_sphere, combine,
                                geometry_from_config, hull_diameter, load_geometry)

CONFIGS = __import__("pathlib").Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("coords, diam", [
    ([-math.pi / 2, 0.0, math.pi / 2], math.pi),
    ([0.0], 0.0),
    ([0.0, 1.7], 1.7),
])
def test_build_points(coords, diam):
    g = build_points(coords)
    assert g.dimension == 1
    assert np.all(g.weights == 1.0)
    assert np.array_equal(g.nodes[:, 0], coords)
    assert g.d_gamma == pytest.approx(diam, abs=1e-15)


def test_duplicate_points_rejected():
    with pytest.raises(InvalidGeometryError):
        build_points([0.0, 1.0, 0.0])
    with pytest.raises(InvalidGeometryError):
        build_points([])


def test_circle_and_segment():
    c = build_curve("circle", 64, radius=1.0)
    assert c.total_measure == pytest.approx(2 * math.pi, abs=1e-10)
    assert c.d_gamma == pytest.approx(2.0, abs=1e-6)
    assert c.convex
    s = build_curve("segment", 64, length=1.0)
    assert s.d_gamma == pytest.approx(1.0, abs=1e-12)
    assert s.total_measure == pytest.approx(1.0, abs=1e-13)
    assert not s.convex


def test_ellipse_perimeter():
    from scipy.special import ellipe
    a, b = 1.0, 0.6
    g = build_curve("ellipse", 128, a=a, b=b)
    assert g.total_measure == pytest.approx(4 * a * ellipe(1 - (b / a) ** 2), rel=1e-12)


@pytest.mark.parametrize("n", [8, 32])
def test_circle_mesh_doubling(n):
    a = build_curve("circle", n, radius=1.3).total_measure
    b = build_curve("circle", 2 * n, radius=1.3).total_measure
    assert abs(a - b) < 1e-10


def test_curve_errors():
    with pytest.raises(InvalidGeometryError):
        build_curve("circle", 4)
    with pytest.raises(InvalidGeometryError):
        build_curve("custom", 16, param=lambda t: np.stack([np.zeros_like(t), np.zeros_like(t)]))
    with pytest.raises(InvalidGeometryError):
        build_curve("triangle", 16)


def test_custom_closed_curve_matches_circle():
    g = build_curve("custom", 64, param=lambda t: np.stack([np.cos(t), np.sin(t)]), convex=True)
    assert g.total_measure == pytest.approx(2 * math.pi, abs=1e-10)


@pytest.mark.parametrize("radius", [1.0, 2.0])
def test_sphere(radius):
    g = build_sphere(radius, 500)
    assert g.total_measure == pytest.approx(4 * math.pi * radius**2, abs=1e-10 * radius**2)
    assert g.d_gamma == pytest.approx(2 * radius, abs=1e-12)


def test_sphere_node_count():
    g = build_sphere(1.0, 50)
    assert abs(g.n - 50) <= 5
    with pytest.raises(InvalidGeometryError):
        build_sphere(1.0, 49)


def test_hull_diameter_examples():
    c = build_curve("circle", 64)
    assert hull_diameter(c.nodes) == pytest.approx(2.0, abs=c.max_spacing())
    assert hull_diameter([-math.pi / 2, 0, math.pi / 2]) == pytest.approx(math.pi)
    two = combine(build_curve("circle", 64), build_curve("circle", 64, center=(3.0, 0.0)))
    assert two.d_gamma == pytest.approx(5.0, abs=1e-12)
    with pytest.raises(InvalidGeometryError):
        hull_diameter(np.zeros((0, 2)))


@given(arrays(float, (12, 3), elements=st.floats(-5, 5)),
       st.floats(0, 2 * math.pi), st.floats(0, math.pi),
       arrays(float, 3, elements=st.floats(-10, 10)))
def test_hull_diameter_rigid_invariance(x, a, b, shift):
    rz = np.array([[math.cos(a), -math.sin(a), 0], [math.sin(a), math.cos(a), 0], [0, 0, 1]])
    rx = np.array([[1, 0, 0], [0, math.cos(b), -math.sin(b)], [0, math.sin(b), math.cos(b)]])
    y = x @ (rz @ rx).T + shift
    assert abs(hull_diameter(x) - hull_diameter(y)) <= 1e-12 * max(1.0, hull_diameter(x))


@pytest.mark.parametrize("name", ["circle", "segment", "ellipse", "two_circles",
                                  "point", "two_point", "three_point", "sphere"])
def test_shipped_configs_load(name):
    g = load_geometry(CONFIGS / f"{name}.json")
    assert g.n >= 1
    assert np.all(g.weights > 0)


def test_config_refines_with_wavenumber():
    cfg = json.loads((CONFIGS / "circle.json").read_text())
    coarse = geometry_from_config(cfg)
    fine = geometry_from_config(cfg, wavenumber=200.0)
    assert fine.n > coarse.n
    # circumference 2 pi over wavelength 2 pi / 200
    assert fine.n / 200.0 >= 6


@pytest.mark.parametrize("cfg", [
    {"shapes": []},
    {"dimension": 2, "shapes": []},
    {"dimension": 2, "shapes": [{"kind": "points", "coords": [0]}]},
    {"dimension": 1, "shapes": [{"kind": "blob"}]},
    {"dimension": 3, "shapes": [{"kind": "circle"}]},
])
def test_bad_configs(cfg):
    with pytest.raises(InvalidGeometryError):
        geometry_from_config(cfg)


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(InvalidGeometryError):
        load_geometry(p)
