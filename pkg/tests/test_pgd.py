import numpy as np
import pytest

from errors import DegenerateModeError, InvalidArgumentError, NonConvergenceError
from fe_core import (
    Grid1D,
    Grid2D,
    assemble_convection_1d,
    assemble_load_1d,
    assemble_mass_1d,
    assemble_stiffness_1d,
    fe2d_solve,
    relative_l2_error,
)
from pgd import (
    ads_fixed_point,
    ads_halfstep_x,
    ads_halfstep_y,
    build_separated_problem,
    direction_update,
    pgd_enrich,
    pgd_evaluate,
    pgd_solve,
    rank1_difference_norm,
    rank1_norm,
)
from problem_model import ScalarFunction1D, SeparableSum, SeparableTerm


def grids(problem, nx, ny):
    d = problem.domain
    return Grid1D(d.x0, d.x1, nx), Grid1D(d.y0, d.y1, ny)


def test_single_mode_matches_fe_on_separable_problem(poisson_problem):
    x_grid, y_grid = grids(poisson_problem, 24, 24)
    sol = pgd_solve(poisson_problem, x_grid, y_grid, tol_fp=1e-8, n_modes=1)
    g2 = Grid2D(x_grid, y_grid)
    assert sol.m == 1
    assert relative_l2_error(pgd_evaluate(sol, g2), fe2d_solve(poisson_problem, g2)) < 1e-6
    assert sol.report.enrichments[0].fp_iterations <= 3


def test_gauge_does_not_change_the_result(two_source):
    x_grid, y_grid = grids(two_source, 40, 8)
    g2 = Grid2D(x_grid, y_grid)
    plain = pgd_evaluate(pgd_solve(two_source, x_grid, y_grid, n_modes=2), g2)
    scaled = pgd_evaluate(pgd_solve(two_source, x_grid, y_grid, n_modes=2, initial_scale=7.3), g2)
    assert np.abs(plain.values - scaled.values).max() <= 1e-9 * np.abs(plain.values).max()


def test_difference_norm_matches_kronecker(two_source):
    x_grid, y_grid = grids(two_source, 6, 4)
    sp = build_separated_problem(two_source, x_grid, y_grid)
    rng = np.random.default_rng(5)
    new = [rng.normal(size=7), rng.normal(size=5)]
    old = [new[0] + 1e-3 * rng.normal(size=7), new[1] + 1e-3 * rng.normal(size=5)]
    diff = np.kron(new[0], new[1]) - np.kron(old[0], old[1])
    gram = np.kron(sp.norm_masses[0], sp.norm_masses[1])
    assert rank1_difference_norm(sp, new, old) == pytest.approx(np.sqrt(diff @ gram @ diff), rel=1e-10)
    assert rank1_norm(sp, new) == pytest.approx(np.sqrt(np.kron(*new) @ gram @ np.kron(*new)), rel=1e-12)


def test_zero_frozen_factor_is_degenerate(two_source):
    x_grid, y_grid = grids(two_source, 6, 4)
    sp = build_separated_problem(two_source, x_grid, y_grid)
    with pytest.raises(DegenerateModeError):
        direction_update(sp, [np.ones(7), np.zeros(5)], [], 0)


def test_zero_forcing_needs_no_modes(poisson_problem):
    problem = poisson_problem.model_copy(update={"f": SeparableSum()})
    x_grid, y_grid = grids(problem, 8, 8)
    sol = pgd_solve(problem, x_grid, y_grid)
    assert sol.m == 0
    assert sol.report.stopped_by == "exact"
    assert np.allclose(pgd_evaluate(sol, Grid2D(x_grid, y_grid)).values, 0.0)


def test_fixed_point_budget_is_enforced(two_source):
    x_grid, y_grid = grids(two_source, 20, 6)
    sp = build_separated_problem(two_source, x_grid, y_grid)
    with pytest.raises(NonConvergenceError) as excinfo:
        ads_fixed_point(sp, [], tol_fp=1e-12, max_fp=1)
    # the first pass always moves the whole product
    assert excinfo.value.last_increment == pytest.approx(1.0)
    assert excinfo.value.iterations == 1
    with pytest.raises(NonConvergenceError):
        pgd_solve(two_source, x_grid, y_grid, tol_fp=1e-12, max_fp=1)


def test_fixed_mode_count(two_source):
    x_grid, y_grid = grids(two_source, 30, 8)
    sol = pgd_solve(two_source, x_grid, y_grid, n_modes=3)
    assert sol.m == 3
    assert sol.report.stopped_by == "fixed_modes"
    assert sol.report.mode_count == 3
    assert len(sol.report.iterations) == 3
    assert sol.report.enrichments[0].enrichment_ratio == pytest.approx(1.0)


def test_greedy_stops_on_ratio(two_source):
    x_grid, y_grid = grids(two_source, 30, 8)
    sol = pgd_solve(two_source, x_grid, y_grid, tol_e=2e-2, max_modes=30)
    report = sol.report
    assert report.stopped_by == "enrichment"
    assert sol.m >= 2
    assert report.enrichments[-1].enrichment_ratio <= 2e-2
    assert all(rec.enrichment_ratio > 2e-2 for rec in report.enrichments[1:-1])


def test_rank_one_problem_stops_after_second_mode(poisson_problem):
    x_grid, y_grid = grids(poisson_problem, 16, 16)
    sol = pgd_solve(poisson_problem, x_grid, y_grid, tol_e=1e-6)
    assert sol.report.stopped_by == "enrichment"
    assert sol.m == 2
    assert sol.report.enrichments[1].enrichment_ratio <= 1e-6


def test_lift_carries_inlet_profile(inlet_only):
    x_grid, y_grid = grids(inlet_only, 16, 10)
    sol = pgd_solve(inlet_only, x_grid, y_grid, n_modes=2)
    field = pgd_evaluate(sol, Grid2D(x_grid, y_grid))
    ys = y_grid.nodes
    assert np.allclose(field.values[0, :], ys * (1.0 - ys), atol=1e-14)
    assert np.allclose(field.values[-1, :], 0.0, atol=1e-14)
    assert np.allclose(field.values[:, 0], 0.0, atol=1e-14)
    for pair in sol.modes:
        assert pair.ux[0] == 0.0 and pair.uy[0] == 0.0 and pair.uy[-1] == 0.0


def test_halfsteps_compose_one_pass(two_source):
    x_grid, y_grid = grids(two_source, 12, 6)
    sp = build_separated_problem(two_source, x_grid, y_grid)
    ux = ads_halfstep_x(sp, sp.initial_guess(1))
    ux, uy = ads_halfstep_y(sp, ux)
    assert sp.norm(1, uy) == pytest.approx(1.0)
    pair, iterations, increment = pgd_enrich(sp, [], tol_fp=1e-2)
    assert iterations >= 2 and increment <= 1e-2
    assert sp.norm(1, pair.uy) == pytest.approx(1.0)


def test_parametric_problem_is_rejected(channel):
    x_grid, y_grid = grids(channel, 6, 4)
    with pytest.raises(InvalidArgumentError):
        pgd_solve(channel, x_grid, y_grid)


def test_tolerances_must_be_positive(two_source):
    x_grid, y_grid = grids(two_source, 6, 4)
    with pytest.raises(InvalidArgumentError):
        pgd_solve(two_source, x_grid, y_grid, tol_e=0.0)


def _discrete_solution(sp):
    A = sum(coef * np.kron(mats[0], mats[1]) for coef, mats in sp.terms)
    F = sum(np.kron(fx, fy) for fx, fy in sp.loads)
    ny = sp.size(1)
    free = (sp.free[0][:, None] * ny + sp.free[1][None, :]).ravel()
    u = np.zeros(F.size)
    u[free] = np.linalg.solve(A[np.ix_(free, free)], F[free])
    return A, u


def test_energy_error_never_increases_without_advection(two_source):
    problem = two_source.model_copy(update={"b": (0.0, 0.0)})
    x_grid, y_grid = grids(problem, 30, 8)
    A, u = _discrete_solution(build_separated_problem(problem, x_grid, y_grid))
    sol = pgd_solve(problem, x_grid, y_grid, n_modes=5)
    errors = []
    for k in range(1, sol.m + 1):
        e = u - sum(np.kron(pair.ux, pair.uy) for pair in sol.modes[:k])
        errors.append(float(e @ A @ e))
    assert all(later <= earlier * (1.0 + 1e-10) for earlier, later in zip(errors, errors[1:]))
    assert errors[-1] < 0.5 * errors[0]


def test_split_forcing_gives_the_same_solution(two_source):
    first, second = two_source.f.terms
    amplitude, center, width = first.fx.params
    half = SeparableTerm(fx=ScalarFunction1D(kind="gaussian", params=(amplitude / 2.0, center, width)), fy=first.fy)
    split = two_source.model_copy(update={"f": SeparableSum(terms=(half, half, second))})
    x_grid, y_grid = grids(two_source, 30, 8)
    g2 = Grid2D(x_grid, y_grid)
    whole = pgd_evaluate(pgd_solve(two_source, x_grid, y_grid, n_modes=3), g2).values
    parts = pgd_evaluate(pgd_solve(split, x_grid, y_grid, n_modes=3), g2).values
    assert np.abs(whole - parts).max() <= 1e-8 * np.abs(whole).max()


def test_converged_mode_is_stationary(two_source):
    problem = two_source.model_copy(update={"b": (0.0, 0.0)})
    x_grid, y_grid = grids(problem, 30, 8)
    sol = pgd_solve(problem, x_grid, y_grid, tol_fp=1e-10, max_fp=300, n_modes=2)
    sp = build_separated_problem(problem, x_grid, y_grid)
    last = sol.modes[-1]
    ux = ads_halfstep_x(sp, last.uy, sol.modes[:-1])
    assert sp.norm(0, ux - last.ux) <= 1e-8 * sp.norm(0, last.ux)


def test_x_halfstep_solves_the_frozen_1d_problem(two_source):
    x_grid, y_grid = grids(two_source, 20, 6)
    sp = build_separated_problem(two_source, x_grid, y_grid)
    uy = np.zeros(y_grid.n_nodes)
    uy[1:-1] = np.random.default_rng(11).uniform(0.5, 1.5, y_grid.n_nodes - 2)

    Mx, Kx, Cx = assemble_mass_1d(x_grid), assemble_stiffness_1d(x_grid), assemble_convection_1d(x_grid)
    My, Ky = assemble_mass_1d(y_grid), assemble_stiffness_1d(y_grid)
    mu, (bx, _) = two_source.mu_value, two_source.b
    A = mu * (uy @ My @ uy) * Kx + mu * (uy @ Ky @ uy) * Mx + bx * (uy @ My @ uy) * Cx
    rhs = sum(
        float(uy @ assemble_load_1d(y_grid, term.fy)) * assemble_load_1d(x_grid, term.fx)
        for term in two_source.f.terms
    )
    expected = np.zeros(x_grid.n_nodes)
    expected[1:-1] = np.linalg.solve(A[1:-1, 1:-1], rhs[1:-1])

    ux = ads_halfstep_x(sp, uy)
    assert ux[0] == 0.0 and ux[-1] == 0.0
    assert np.allclose(ux, expected, rtol=1e-10, atol=1e-13 * np.abs(expected).max())
