import logging
import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import splu

import fe_core
from conftest import exact_sine
from errors import InvalidArgumentError, SingularMatrixError
from fe_core import (
    Field2D,
    Grid1D,
    Grid2D,
    assemble_convection_1d,
    assemble_load_1d,
    assemble_mass_1d,
    assemble_stiffness_1d,
    assemble_weighted_mass_1d,
    dirichlet_values,
    fe2d_solve,
    field_from_function,
    mesh_peclet,
    relative_l2_error,
)
from problem_model import BoundaryCondition, BoundarySpec, ScalarFunction1D, SeparableSum


@pytest.fixture
def grid():
    return Grid1D(0.0, 2.0, 8)


def test_grid_properties(grid):
    assert grid.h == pytest.approx(0.25)
    assert grid.n_nodes == 9
    assert grid.nodes[0] == 0.0 and grid.nodes[-1] == 2.0


def test_grid_rejects_bad_input():
    with pytest.raises(InvalidArgumentError):
        Grid1D(1.0, 1.0, 4)
    with pytest.raises(InvalidArgumentError):
        Grid1D(0.0, 1.0, 0)


def test_mass_stencil(grid):
    M = assemble_mass_1d(grid)
    h = grid.h
    assert np.allclose(M[4, 3:6], h / 6.0 * np.array([1.0, 4.0, 1.0]))
    assert M[0, 0] == pytest.approx(h / 3.0)
    assert M.sum() == pytest.approx(grid.length)
    assert np.allclose(M, M.T)


def test_stiffness_stencil(grid):
    K = assemble_stiffness_1d(grid)
    assert np.allclose(K[4, 3:6], np.array([-1.0, 2.0, -1.0]) / grid.h)
    assert np.allclose(K.sum(axis=1), 0.0)


def test_convection_stencil(grid):
    C = assemble_convection_1d(grid)
    assert np.allclose(C[4, 3:6], [-0.5, 0.0, 0.5])
    # C + C^T only sees the boundary terms of (theta_i theta_l)'
    boundary = np.zeros_like(C)
    boundary[0, 0], boundary[-1, -1] = -1.0, 1.0
    assert np.allclose(C + C.T, boundary)


def test_weighted_mass_with_unit_weight(grid):
    assert np.allclose(assemble_weighted_mass_1d(grid, lambda t: np.ones_like(t)), assemble_mass_1d(grid))


def test_weighted_mass_linear_weight_integral(grid):
    Mw = assemble_weighted_mass_1d(grid, lambda t: t)
    assert Mw.sum() == pytest.approx(2.0, rel=1e-14)


def test_load_of_constant(grid):
    f = assemble_load_1d(grid, lambda t: np.full_like(t, 3.0))
    assert np.allclose(f, 3.0 * assemble_mass_1d(grid) @ np.ones(grid.n_nodes))


def test_interpolation_matrix_reproduces_linear(grid):
    pts = np.array([0.0, 0.1, 1.3, 2.0])
    P = grid.interpolation_matrix(pts)
    assert np.allclose(P @ (3.0 * grid.nodes - 1.0), 3.0 * pts - 1.0)
    with pytest.raises(InvalidArgumentError):
        grid.interpolation_matrix([2.5])


def test_field_shape_is_checked():
    g2 = Grid2D(Grid1D(0.0, 1.0, 2), Grid1D(0.0, 1.0, 3))
    with pytest.raises(InvalidArgumentError):
        Field2D(g2, np.zeros((4, 3)))


def test_l2_norm_of_constant_field():
    g2 = Grid2D(Grid1D(0.0, 2.0, 4), Grid1D(0.0, 3.0, 5))
    assert Field2D(g2, np.full(g2.shape, 2.0)).l2_norm() == pytest.approx(2.0 * math.sqrt(6.0))


def test_manufactured_convergence_rate(poisson_problem):
    errors = []
    for n in (16, 64):
        g2 = Grid2D.for_problem(poisson_problem, n, n)
        u = fe2d_solve(poisson_problem, g2)
        errors.append(relative_l2_error(u, field_from_function(g2, exact_sine)))
    rate = math.log(errors[0] / errors[1]) / math.log(4.0)
    assert 1.8 <= rate <= 2.2


def test_fe_dirichlet_values_imposed(inlet_only):
    g2 = Grid2D.for_problem(inlet_only, 10, 8)
    u = fe2d_solve(inlet_only, g2)
    ys = g2.y_grid.nodes
    assert np.allclose(u.values[0, :], ys * (1.0 - ys), atol=1e-14)
    assert np.allclose(u.values[-1, :], 0.0)


def test_dirichlet_values_corner_priority(inlet_only):
    bc = inlet_only.bc.model_copy(
        update={"bottom": BoundaryCondition.dirichlet(ScalarFunction1D.constant(5.0))}
    )
    problem = inlet_only.model_copy(update={"bc": bc})
    g2 = Grid2D.for_problem(problem, 4, 4)
    mask, values = dirichlet_values(problem, g2)
    assert mask[:, 0].all() and mask[0, :].all()
    assert values[0, 0] == 0.0
    assert values[2, 0] == 5.0


def test_peclet_warning(two_source, caplog):
    g2 = Grid2D.for_problem(two_source, 20, 5)
    assert mesh_peclet(two_source, g2) > 1.0
    with caplog.at_level(logging.WARNING):
        fe2d_solve(two_source, g2)
    assert any("Peclet" in record.message for record in caplog.records)


def test_fe_rejects_parametric_problem(channel):
    with pytest.raises(InvalidArgumentError):
        fe2d_solve(channel, Grid2D.for_problem(channel, 6, 4))


def test_fe_rejects_wrong_grid(poisson_problem):
    with pytest.raises(InvalidArgumentError):
        fe2d_solve(poisson_problem, Grid2D(Grid1D(0.0, 2.0, 4), Grid1D(0.0, 1.0, 4)))


def test_fe_without_dirichlet_is_rejected(poisson_problem):
    free = BoundarySpec(
        left=BoundaryCondition.neumann(),
        right=BoundaryCondition.neumann(),
        bottom=BoundaryCondition.neumann(),
        top=BoundaryCondition.neumann(),
    )
    with pytest.raises(InvalidArgumentError):
        fe2d_solve(poisson_problem.model_copy(update={"bc": free}), Grid2D.for_problem(poisson_problem, 4, 4))


def test_relative_error_checks():
    g_a = Grid2D(Grid1D(0.0, 1.0, 4), Grid1D(0.0, 1.0, 4))
    g_b = Grid2D(Grid1D(0.0, 1.0, 5), Grid1D(0.0, 1.0, 4))
    with pytest.raises(InvalidArgumentError):
        relative_l2_error(Field2D.zeros(g_a), Field2D.zeros(g_b))
    with pytest.raises(ZeroDivisionError):
        relative_l2_error(Field2D.zeros(g_a), Field2D.zeros(g_a))
    ones = Field2D(g_a, np.ones(g_a.shape))
    assert relative_l2_error(ones, ones) == 0.0


def test_singular_operator_fails_even_with_zero_forcing(poisson_problem, monkeypatch):
    grid = Grid2D.for_problem(poisson_problem, 6, 6)
    n = grid.shape[0] * grid.shape[1]
    monkeypatch.setattr(fe_core, "fe2d_operator", lambda problem, g: sp.csr_matrix((n, n)))
    unforced = poisson_problem.model_copy(update={"f": SeparableSum()})
    with pytest.raises(SingularMatrixError):
        fe2d_solve(unforced, grid)


def test_inaccurate_factor_is_reported(poisson_problem, monkeypatch):
    class _OffFactor:
        def __init__(self, matrix):
            self._inner = splu(matrix)

        def solve(self, rhs):
            return 1.01 * self._inner.solve(rhs)

    monkeypatch.setattr(fe_core, "splu", _OffFactor)
    with pytest.raises(SingularMatrixError, match="residual"):
        fe2d_solve(poisson_problem, Grid2D.for_problem(poisson_problem, 6, 6))
