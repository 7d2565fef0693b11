import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from peaklab.errors import GeometryError, ShapeMismatch
from peaklab.geometry import (
    CUT_FLOOR,
    ball,
    boundary_facets,
    box,
    build_grid,
    ellipsoid,
    integrate,
)


def test_domain_validation():
    with pytest.raises(GeometryError):
        ball(1.0, 2)
    with pytest.raises(GeometryError):
        ball(-1.0, 3)
    with pytest.raises(GeometryError):
        ellipsoid((1.0, 0.0, 1.0))
    d = ellipsoid((1.0, 1.0, 1.0, 1.3))
    assert d.dimension == 4
    assert not d.contains(np.array([[0.0, 0.0, 0.0, 1.3]]))[0]
    assert d.contains(np.array([[0.0, 0.0, 0.0, 1.29]]))[0]


def test_contains_is_strict_on_the_boundary():
    d = ball(1.0, 3)
    pts = np.array([[1.0, 0.0, 0.0], [0.999, 0.0, 0.0], [0.0, 0.0, 0.0]])
    assert list(d.contains(pts)) == [False, True, True]


def test_boundary_margin_exact_on_ball_and_box():
    d = ball(2.0, 3)
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.5, 0.0]])
    np.testing.assert_allclose(d.boundary_margin(pts), [2.0, 1.0, 0.5])

    b = box((2.0, 4.0, 2.0))
    np.testing.assert_allclose(
        b.boundary_margin(np.array([[0.0, 0.0, 0.0], [0.5, 1.0, 0.0]])),
        [1.0, 0.5])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-0.9, 0.9), min_size=3, max_size=3))
def test_margin_nonnegative_iff_inside(coords):
    d = ball(1.0, 3)
    p = np.array([coords])
    inside = bool(d.contains(p)[0])
    margin = float(d.boundary_margin(p)[0])
    if inside:
        assert margin > 0
    else:
        assert margin <= 0


def test_inradius_and_volume():
    assert ball(1.5, 4).inradius() == pytest.approx(1.5)
    assert box((2.0, 6.0, 4.0)).inradius() == pytest.approx(1.0)
    assert ellipsoid((1.0, 1.0, 1.0, 1.3)).inradius() == pytest.approx(1.0)
    assert ball(1.0, 3).volume() == pytest.approx(4.0 * math.pi / 3.0)
    assert ball(1.0, 4).volume() == pytest.approx(math.pi ** 2 / 2.0)
    assert box((2.0, 3.0, 1.0)).volume() == pytest.approx(6.0)


def test_smoothness_flag():
    assert ball(1.0, 3).is_smooth
    assert ellipsoid((1.0, 2.0, 1.0)).is_smooth
    assert not box((1.0, 1.0, 1.0)).is_smooth


def test_node_counts_on_tiny_grids():
    # every lattice point of {-0.5, 0, 0.5}^3 is strictly inside the unit
    # ball (the corners sit at radius ~0.866), so the count is 3^3
    g = build_grid(ball(1.0, 3), 0.5)
    assert g.n_nodes == 27
    gb = build_grid(box((2.0, 2.0, 2.0)), 1.0)
    assert gb.n_nodes == 1
    with pytest.raises(GeometryError):
        build_grid(ball(1.0, 3), 0.0)
    with pytest.raises(GeometryError):
        # bounding lattice would blow past the size guard
        build_grid(ball(1.0, 3), 1e-4)


def test_grid_volume_consistency():
    g = build_grid(ball(1.0, 4), 0.1)
    vol = integrate(np.ones(g.n_nodes), g)
    assert abs(vol - math.pi ** 2 / 2.0) / (math.pi ** 2 / 2.0) < 0.02


def test_integrate_shape_mismatch(ball3):
    with pytest.raises(ShapeMismatch):
        integrate(np.ones(ball3.n_nodes + 1), ball3)


def test_cut_distances_have_a_floor(ball3):
    table = ball3.cut_distance_table()
    d = np.asarray(table["distance"], float)
    assert d.size > 0
    assert np.all(d >= CUT_FLOOR * ball3.h - 1e-15)
    assert np.all(d <= ball3.h + 1e-15)


def test_multilinear_sampling_reproduces_affine_fields(ball3):
    coef = np.array([0.3, -1.1, 0.7])
    vals = ball3.coords @ coef + 2.0
    pts = np.array([[0.05, -0.12, 0.31], [0.0, 0.0, 0.0], [-0.4, 0.2, 0.1]])
    got, complete = ball3.sample_multilinear(vals, pts)
    assert complete.all()
    np.testing.assert_allclose(got, pts @ coef + 2.0, atol=1e-12)


def test_nearest_node(ball3):
    idx = ball3.nearest_node(np.array([0.0, 0.0, 0.0]))
    assert np.linalg.norm(ball3.coords[idx]) < ball3.h


def test_boundary_normals_are_unit(ball3):
    pts = np.array([[0.6, 0.0, 0.0], [0.0, -0.3, 0.4]])
    n = ball3.domain.boundary_normal(pts / np.linalg.norm(pts, axis=1)[:, None])
    np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-12)


def test_facet_totals_match_surface_areas():
    fs = boundary_facets(ball(1.0, 3), 0.05)
    assert abs(fs.total_area - 4.0 * math.pi) / (4.0 * math.pi) < 1e-3
    fs4 = boundary_facets(ball(1.0, 4), 0.05)
    assert abs(fs4.total_area - 2.0 * math.pi ** 2) / (2.0 * math.pi ** 2) < 1e-3
    fb = boundary_facets(box((1.0, 1.0, 1.0)), 0.05)
    assert fb.total_area == pytest.approx(6.0, abs=1e-10)
    fe = boundary_facets(ellipsoid((1.0, 1.0, 1.0, 1.3)), 0.2)
    assert 2.0 * math.pi ** 2 < fe.total_area < 2.0 * math.pi ** 2 * 1.3 ** 3


def test_facet_normals_point_outward():
    fs = boundary_facets(ball(1.0, 3), 0.2)
    dots = np.sum(fs.position * fs.normal, axis=1)
    assert np.all(dots > 0)


def test_axis_cut():
    d = ball(2.0, 3)
    pts = np.array([[0.0, 1.0, 0.0]])
    assert d.axis_cut(pts, 0, +1)[0] == pytest.approx(math.sqrt(3.0))
    assert d.axis_cut(pts, 0, -1)[0] == pytest.approx(math.sqrt(3.0))
    b = box((2.0, 2.0, 2.0))
    assert b.axis_cut(np.array([[0.25, 0.0, 0.0]]), 0, +1)[0] == pytest.approx(0.75)
