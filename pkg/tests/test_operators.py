import numpy as np
import pytest

from peaklab.errors import FacetOutsideGrid, ShapeMismatch, SolverDiverged
from peaklab.geometry import ball, boundary_facets, build_grid
from peaklab.operators import (
    Field,
    LinearSolveOptions,
    apply_laplacian,
    cut_face_normal_derivative,
    normal_derivative,
    solve_poisson,
)


def deep_mask(grid):
    """Nodes whose full stencil avoids every boundary-adjacent row.

    The symmetrized cut stencil perturbs boundary rows and their
    neighbours, so second-order exactness statements only hold here.
    """
    adj = grid.boundary_adjacent
    ok = ~adj.copy()
    idx = grid.lattice - grid.kmin
    for axis in range(grid.dimension):
        for step in (-1, 1):
            shifted = idx.copy()
            shifted[:, axis] += step
            nbr = grid.node_id_box[tuple(shifted.T)]
            has = nbr >= 0
            ok &= ~has | ~adj[np.where(has, nbr, 0)]
    return ok


def test_field_validation(ball4):
    with pytest.raises(ShapeMismatch):
        Field(ball4, np.ones(3))
    f = Field(ball4, np.ones(ball4.n_nodes))
    assert f.norm_sup() == 1.0
    g = f.copy()
    g.values[0] = 5.0
    assert f.values[0] == 1.0


def test_laplacian_exact_on_quadratics_away_from_cuts(ball4):
    # apply_laplacian returns -Lap f; for this field Lap f = 2
    x = ball4.coords
    vals = 2.0 * x[:, 0] ** 2 - x[:, 1] ** 2 + 0.5 * x[:, 2] * x[:, 3] + x[:, 1] - 3.0
    lap = apply_laplacian(Field(ball4, vals), ball4)
    deep = deep_mask(ball4)
    assert deep.sum() > 1000
    np.testing.assert_allclose(lap[deep], -2.0, atol=1e-10)


def test_poisson_quadratic_source(ball4):
    # -Lap u = 1 on the unit ball has u = (1 - |x|^2) / (2 N)
    u = solve_poisson(np.ones(ball4.n_nodes), ball4)
    exact = (1.0 - np.sum(ball4.coords ** 2, axis=1)) / 8.0
    assert np.max(np.abs(u.values - exact)) < 0.01
    assert np.min(u.values) > 0.0


def test_poisson_solve_then_apply_roundtrip(ball4):
    rng = np.random.default_rng(7)
    rhs = rng.standard_normal(ball4.n_nodes)
    u = solve_poisson(rhs, ball4, options=LinearSolveOptions(rel_tolerance=1e-12))
    back = apply_laplacian(u, ball4)
    assert np.max(np.abs(back - rhs)) < 1e-8 * np.max(np.abs(rhs))


def test_poisson_dirichlet_data(ball4):
    # -Lap u = 0 with u = x0 on the boundary is u = x0 everywhere
    u = solve_poisson(np.zeros(ball4.n_nodes), ball4,
                      dirichlet=lambda pts: pts[:, 0])
    assert np.max(np.abs(u.values - ball4.coords[:, 0])) < 0.03


def test_poisson_diverges_under_tiny_iteration_budget(ball4):
    opts = LinearSolveOptions(rel_tolerance=1e-14, max_iterations=2)
    with pytest.raises(SolverDiverged):
        solve_poisson(np.ones(ball4.n_nodes), ball4, options=opts)


def test_solver_options_iteration_cap():
    assert LinearSolveOptions().iteration_cap(100) == 200
    assert LinearSolveOptions().iteration_cap(4) == 100
    assert LinearSolveOptions(max_iterations=7).iteration_cap(10**6) == 7


def test_normal_derivative_on_radial_field(ball4):
    u = solve_poisson(np.ones(ball4.n_nodes), ball4)
    facets = boundary_facets(ball4.domain, 0.3)
    dn, fallback = normal_derivative(u, facets, ball4)
    # du/dn of (1 - r^2)/8 at r = 1 is -1/4
    assert np.max(np.abs(dn + 0.25)) < 0.06
    assert not fallback.any()


def test_normal_derivative_rejects_foreign_facets(ball4):
    facets = boundary_facets(ball(2.0, 4), 0.5)
    with pytest.raises(FacetOutsideGrid):
        normal_derivative(Field(ball4, np.ones(ball4.n_nodes)), facets, ball4)


def test_cut_face_derivative_on_boundary_vanishing_quadratic(ball4):
    # u = 3 (1 - r^2) vanishes on the sphere and has du/dn = -6 there;
    # the zero-anchored fits reproduce axis quadratics exactly
    vals = 3.0 * (1.0 - np.sum(ball4.coords ** 2, axis=1))
    dn, mu, fallback = cut_face_normal_derivative(Field(ball4, vals), ball4)
    clean = ~fallback
    assert clean.sum() > 0
    np.testing.assert_allclose(dn[clean], -6.0, atol=1e-9)
    # the one-point fallback is first order: allow an O(h) miss per face
    if fallback.any():
        assert np.max(np.abs(dn[fallback] + 6.0) * mu[fallback]) < 6.0 * ball4.h
    assert np.all(mu > 0)
    assert np.all(mu <= 1.0 + 1e-12)
