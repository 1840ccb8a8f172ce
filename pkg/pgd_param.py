"""
Parametric PGD

The diffusivity mu becomes a third coordinate on [mu_min, mu_max] with its own
P1 factor, so one offline run yields u(x, y, mu) ~ lift + sum_k ux_k uy_k umu_k
that can be evaluated at any mu without another solve.

mu multiplies the diffusion term only: diffusion blocks carry the
mu-weighted parameter mass M^mu, advection blocks the plain parameter mass
N^mu. Each ADS sweep updates x, then y, then mu with the freshest factors.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from errors import InvalidArgumentError, OutOfRangeError
from fe_core import Field2D, Grid1D, Grid2D, assemble_load_1d, assemble_mass_1d, assemble_weighted_mass_1d
from numerics_core import DenseMatrix, DenseVector
from pgd import (
    MAX_FP,
    MAX_MODES,
    ADSReport,
    SeparatedProblem,
    ads_sweep,
    greedy_enrichment,
    side_lifts,
    spatial_free,
    spatial_operators,
)
from problem_model import MuInterval, ProblemSpec, SeparableSum, validate_problem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParamGrid:
    """Uniform P1 grid on the parameter interval."""

    mu_min: float
    mu_max: float
    n_elems: int

    def __post_init__(self) -> None:
        if not 0.0 < self.mu_min < self.mu_max:
            raise InvalidArgumentError(f"parameter grid needs 0 < mu_min < mu_max, got [{self.mu_min}, {self.mu_max}]")

    @property
    def grid(self) -> Grid1D:
        return Grid1D(self.mu_min, self.mu_max, self.n_elems)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    @classmethod
    def for_problem(cls, problem: ProblemSpec, n_elems: int) -> "ParamGrid":
        if not isinstance(problem.mu, MuInterval):
            raise InvalidArgumentError("problem has a constant diffusivity; no parameter grid to build")
        return cls(problem.mu.mu_min, problem.mu.mu_max, n_elems)


@dataclass(frozen=True, eq=False)
class ParamOperators:
    """Parameter-direction matrices.

    Attributes:
        M_mu: int mu theta_i theta_j, weights diffusion
        N_mu: int theta_i theta_j, weights advection and defines the norm
        f_mu: One load vector per forcing term; int f_mu theta_l, or int theta_l
            for mu-independent terms
    """

    M_mu: DenseMatrix
    N_mu: DenseMatrix
    f_mu: Tuple[DenseVector, ...]


def assemble_param_masses(pgrid: ParamGrid, forcing: Optional[SeparableSum] = None) -> ParamOperators:
    grid = pgrid.grid
    # the weight is linear, so 3-point Gauss is exact on every element
    M_mu = assemble_weighted_mass_1d(grid, lambda mu: mu, n_points=3)
    N_mu = assemble_mass_1d(grid)
    ones = np.ones(grid.n_nodes)
    loads = []
    for term in (forcing.terms if forcing is not None else ()):
        loads.append(assemble_load_1d(grid, term.fmu) if term.fmu is not None else N_mu @ ones)
    return ParamOperators(M_mu=M_mu, N_mu=N_mu, f_mu=tuple(loads))


@dataclass(frozen=True, eq=False)
class ModeTriple:
    ux: DenseVector
    uy: DenseVector
    umu: DenseVector


@dataclass(eq=False)
class PGDParamSolution:
    x_grid: Grid1D
    y_grid: Grid1D
    pgrid: ParamGrid
    modes: List[ModeTriple]
    lift: List[ModeTriple] = field(default_factory=list)
    report: Optional[ADSReport] = None

    @property
    def m(self) -> int:
        return len(self.modes)


def build_param_problem(problem: ProblemSpec, x_grid: Grid1D, y_grid: Grid1D, pgrid: ParamGrid) -> SeparatedProblem:
    issues = validate_problem(problem, "pgd-param")
    if issues:
        raise InvalidArgumentError("; ".join(issues))
    interval = problem.mu
    if abs(pgrid.mu_min - interval.mu_min) > 1e-12 or abs(pgrid.mu_max - interval.mu_max) > 1e-12:
        raise InvalidArgumentError(
            f"parameter grid [{pgrid.mu_min}, {pgrid.mu_max}] does not match [{interval.mu_min}, {interval.mu_max}]"
        )

    (Mx, Kx, Cx), (My, Ky, Cy) = spatial_operators(x_grid, y_grid)
    pops = assemble_param_masses(pgrid, problem.f)
    bx, by = problem.b
    terms = [(1.0, (Kx, My, pops.M_mu)), (1.0, (Mx, Ky, pops.M_mu))]
    if bx != 0.0:
        terms.append((bx, (Cx, My, pops.N_mu)))
    if by != 0.0:
        terms.append((by, (Mx, Cy, pops.N_mu)))
    loads = tuple(
        (assemble_load_1d(x_grid, term.fx), assemble_load_1d(y_grid, term.fy), f_mu)
        for term, f_mu in zip(problem.f.terms, pops.f_mu)
    )
    ones = np.ones(pgrid.grid.n_nodes)
    free_x, free_y = spatial_free(problem, x_grid, y_grid)
    return SeparatedProblem(
        terms=tuple(terms),
        loads=loads,
        lifts=tuple((lx, ly, ones) for lx, ly in side_lifts(problem, x_grid, y_grid)),
        norm_masses=(Mx, My, pops.N_mu),
        free=(free_x, free_y, np.arange(pgrid.grid.n_nodes)),
    )


def ads_tristep(sp: SeparatedProblem, triple: ModeTriple, previous: Sequence[ModeTriple] = ()) -> ModeTriple:
    """One x -> y -> mu pass starting from `triple`; uy and umu leave at unit norm."""
    factors = [triple.ux.copy(), triple.uy.copy(), triple.umu.copy()]
    ads_sweep(sp, factors, [(p.ux, p.uy, p.umu) for p in previous])
    return ModeTriple(*factors)


def pgd_param_solve(
    problem: ProblemSpec,
    x_grid: Grid1D,
    y_grid: Grid1D,
    pgrid: ParamGrid,
    tol_e: float = 8e-3,
    tol_fp: float = 1e-2,
    max_modes: int = MAX_MODES,
    n_modes: Optional[int] = None,
    max_fp: int = MAX_FP,
    initial_scale: float = 1.0,
) -> PGDParamSolution:
    start = time.perf_counter()
    sp = build_param_problem(problem, x_grid, y_grid, pgrid)
    modes, report = greedy_enrichment(sp, tol_e, tol_fp, max_modes, n_modes, max_fp, initial_scale)
    logger.info(
        f"Parametric PGD finished: {len(modes)} modes over {pgrid.grid.n_nodes} mu nodes, "
        f"ADS iterations {report.iterations} in {time.perf_counter() - start:.3f}s"
    )
    return PGDParamSolution(
        x_grid=x_grid,
        y_grid=y_grid,
        pgrid=pgrid,
        modes=[ModeTriple(*f) for f in modes],
        lift=[ModeTriple(*lift) for lift in sp.lifts],
        report=report,
    )


def pgd_param_evaluate(sol: PGDParamSolution, grid2d: Grid2D, mu_star: float) -> Field2D:
    """u(x, y, mu_star) with P1 interpolation of every factor; no extrapolation in mu."""
    if not sol.pgrid.mu_min <= mu_star <= sol.pgrid.mu_max:
        raise OutOfRangeError(f"mu={mu_star} outside [{sol.pgrid.mu_min}, {sol.pgrid.mu_max}]")
    Px = sol.x_grid.interpolation_matrix(grid2d.x_grid.nodes)
    Py = sol.y_grid.interpolation_matrix(grid2d.y_grid.nodes)
    Pmu = sol.pgrid.grid.interpolation_matrix([mu_star])[0]
    values = np.zeros(grid2d.shape)
    for triple in list(sol.lift) + list(sol.modes):
        values += float(Pmu @ triple.umu) * np.outer(Px @ triple.ux, Py @ triple.uy)
    return Field2D(grid2d, values)

