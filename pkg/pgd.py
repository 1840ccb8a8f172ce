"""
Proper Generalized Decomposition (PGD)

Greedy rank-1 enrichment u ~ lift + sum_k ux_k (x) uy_k, each new pair found
by an alternating-direction fixed point (ADS): freeze every factor but one,
solve the resulting 1D Galerkin system, move to the next direction.

The engine below works on any number of separated directions; the
non-parametric solver uses two (x, y) and the parametric one adds mu.

A separated operator is a list of terms coef * (A^1 (x) A^2 (x) ...), a load
is a list of rank-1 vectors, and the Dirichlet lift is a list of rank-1
terms whose residual enters every right-hand side. Factors of directions
after the first are normalized to unit discrete L2 norm after each update;
the first factor carries the magnitude.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from errors import DegenerateModeError, InvalidArgumentError, NonConvergenceError, SingularMatrixError
from fe_core import (
    Field2D,
    Grid1D,
    Grid2D,
    assemble_convection_1d,
    assemble_load_1d,
    assemble_mass_1d,
    assemble_stiffness_1d,
)
from numerics_core import DenseMatrix, DenseVector, solve_dense
from problem_model import ProblemSpec, validate_problem

logger = logging.getLogger(__name__)

MAX_FP = 50
MAX_MODES = 30

Factors = List[DenseVector]


class EnrichmentRecord(BaseModel):
    """Outcome of one enrichment step."""

    mode_index: int
    fp_iterations: int
    final_increment: float
    enrichment_ratio: float
    increments: List[float] = []


class ADSReport(BaseModel):
    tol_e: float
    tol_fp: float
    enrichments: List[EnrichmentRecord] = []
    stopped_by: str = ""

    @property
    def mode_count(self) -> int:
        return len(self.enrichments)

    @property
    def iterations(self) -> List[int]:
        return [rec.fp_iterations for rec in self.enrichments]


@dataclass(frozen=True, eq=False)
class SeparatedProblem:
    """Algebraic data of a separated problem with one entry per direction.

    Attributes:
        terms: (coefficient, matrices) with matrices[d][i, l] = test i, trial l
        loads: Rank-1 right-hand-side terms
        lifts: Rank-1 Dirichlet lift terms
        norm_masses: Mass matrix per direction defining the L2 norms
        free: Unconstrained indices per direction
    """

    terms: Tuple[Tuple[float, Tuple[DenseMatrix, ...]], ...]
    loads: Tuple[Tuple[DenseVector, ...], ...]
    lifts: Tuple[Tuple[DenseVector, ...], ...]
    norm_masses: Tuple[DenseMatrix, ...]
    free: Tuple[np.ndarray, ...]

    @property
    def dims(self) -> int:
        return len(self.norm_masses)

    def size(self, axis: int) -> int:
        return self.norm_masses[axis].shape[0]

    def initial_guess(self, axis: int) -> DenseVector:
        u = np.zeros(self.size(axis))
        u[self.free[axis]] = 1.0
        return u

    def norm(self, axis: int, u: DenseVector) -> float:
        return math.sqrt(max(float(u @ self.norm_masses[axis] @ u), 0.0))


def rank1_inner(sp: SeparatedProblem, u: Sequence[DenseVector], v: Sequence[DenseVector]) -> float:
    """L2 inner product of two rank-1 tensors as a product of per-direction Gram factors."""
    return math.prod(float(u[k] @ sp.norm_masses[k] @ v[k]) for k in range(sp.dims))


def rank1_norm(sp: SeparatedProblem, u: Sequence[DenseVector]) -> float:
    return math.sqrt(max(rank1_inner(sp, u, u), 0.0))


def rank1_difference_norm(sp: SeparatedProblem, new: Sequence[DenseVector], old: Sequence[DenseVector]) -> float:
    """||new_1 (x) ... - old_1 (x) ...||_L2 without cancellation.

    The difference telescopes into sum_i old_1..old_{i-1} (x) (new_i - old_i) (x) new_{i+1}..,
    and the norm is the Gram sum of those rank-1 pieces.
    """
    pieces = []
    for i in range(sp.dims):
        pieces.append([old[k] for k in range(i)] + [new[i] - old[i]] + [new[k] for k in range(i + 1, sp.dims)])
    total = sum(rank1_inner(sp, a, b) for a in pieces for b in pieces)
    return math.sqrt(max(total, 0.0))


def direction_update(
    sp: SeparatedProblem,
    factors: Sequence[DenseVector],
    previous: Sequence[Sequence[DenseVector]],
    axis: int,
) -> DenseVector:
    """Solve for the factor along `axis` with every other factor frozen.

    The operator is sum_t c_t prod_{k != axis}(u_k^T A_t^k u_k) A_t^axis; the
    right-hand side holds the projected load minus the projected action of the
    lift and of all previously computed modes.

    Raises:
        DegenerateModeError: If a frozen factor is zero or the operator is singular
    """
    others = [k for k in range(sp.dims) if k != axis]
    for k in others:
        if not np.any(factors[k]):
            raise DegenerateModeError(f"frozen factor along direction {k} is identically zero")

    n = sp.size(axis)
    A = np.zeros((n, n))
    rhs = np.zeros(n)
    known = list(sp.lifts) + list(previous)
    for coef, mats in sp.terms:
        weight = coef * math.prod(float(factors[k] @ mats[k] @ factors[k]) for k in others)
        A += weight * mats[axis]
        for s in known:
            ws = coef * math.prod(float(factors[k] @ mats[k] @ s[k]) for k in others)
            rhs -= ws * (mats[axis] @ s[axis])
    for load in sp.loads:
        rhs += math.prod(float(factors[k] @ load[k]) for k in others) * load[axis]

    u = np.zeros(n)
    free = sp.free[axis]
    if not np.any(rhs[free]):
        return u
    try:
        u[free] = solve_dense(A[np.ix_(free, free)], rhs[free])
    except SingularMatrixError as exc:
        raise DegenerateModeError(f"direction {axis} operator is singular: {exc}") from exc
    return u


def normalize_factor(sp: SeparatedProblem, factors: Factors, axis: int) -> None:
    """Rescale factors[axis] to unit norm in place; factors[0] absorbs the magnitude."""
    nrm = sp.norm(axis, factors[axis])
    if nrm == 0.0:
        raise DegenerateModeError(f"factor along direction {axis} collapsed to zero")
    factors[axis] = factors[axis] / nrm
    factors[0] = factors[0] * nrm


def ads_sweep(sp: SeparatedProblem, factors: Factors, previous: Sequence[Sequence[DenseVector]]) -> bool:
    """One alternating pass over all directions in order; False if the first factor vanished."""
    for axis in range(sp.dims):
        factors[axis] = direction_update(sp, factors, previous, axis)
        if axis == 0:
            if not np.any(factors[0]):
                return False
        else:
            normalize_factor(sp, factors, axis)
    return True


def ads_fixed_point(
    sp: SeparatedProblem,
    previous: Sequence[Sequence[DenseVector]],
    tol_fp: float,
    max_fp: int = MAX_FP,
    initial_scale: float = 1.0,
) -> Tuple[Factors, int, List[float]]:
    """Alternate direction updates until the relative increment of the product is <= tol_fp.

    Returns:
        (factors, iterations, increments); a zero first factor after the first
        pass means nothing is left to capture and is returned as is

    Raises:
        NonConvergenceError: If max_fp passes do not reach tol_fp
    """
    if tol_fp <= 0.0:
        raise InvalidArgumentError(f"tol_fp must be positive, got {tol_fp}")
    factors: Factors = [np.zeros(sp.size(0))] + [sp.initial_guess(k) for k in range(1, sp.dims)]
    if sp.dims > 1:
        factors[1] = initial_scale * factors[1]

    increments: List[float] = []
    increment = math.inf
    for iteration in range(1, max_fp + 1):
        old = [f.copy() for f in factors]
        if not ads_sweep(sp, factors, previous):
            return factors, iteration, [0.0]
        increment = rank1_difference_norm(sp, factors, old) / rank1_norm(sp, factors)
        increments.append(increment)
        if increment <= tol_fp:
            return factors, iteration, increments
    raise NonConvergenceError(
        f"ADS fixed point did not reach tol_fp={tol_fp:g} in {max_fp} iterations (last increment {increment:.3e})",
        increment,
        max_fp,
    )


def greedy_enrichment(
    sp: SeparatedProblem,
    tol_e: float,
    tol_fp: float,
    max_modes: int = MAX_MODES,
    n_modes: Optional[int] = None,
    max_fp: int = MAX_FP,
    initial_scale: float = 1.0,
) -> Tuple[List[Factors], ADSReport]:
    """Add rank-1 modes until the newest-to-first norm ratio is <= tol_e.

    With n_modes set, exactly that many modes are computed and the ratio is
    only reported. Enrichment ends early when a new mode is identically zero.
    """
    if tol_e <= 0.0 or tol_fp <= 0.0:
        raise InvalidArgumentError("tolerances must be positive")
    limit = n_modes if n_modes is not None else max_modes
    if limit < 1:
        raise InvalidArgumentError(f"mode budget must be >= 1, got {limit}")

    report = ADSReport(tol_e=tol_e, tol_fp=tol_fp)
    modes: List[Factors] = []
    first_norm = 0.0
    forced = any(np.any(v) for load in sp.loads for v in load)

    for index in range(1, limit + 1):
        factors, iterations, increments = ads_fixed_point(sp, modes, tol_fp, max_fp, initial_scale)
        norm = rank1_norm(sp, factors)
        if norm == 0.0:
            if index == 1 and forced:
                raise DegenerateModeError("first mode is identically zero although the forcing is not")
            report.stopped_by = "exact"
            break
        if index == 1:
            first_norm = norm
        ratio = norm / first_norm
        modes.append(factors)
        report.enrichments.append(
            EnrichmentRecord(
                mode_index=index,
                fp_iterations=iterations,
                final_increment=increments[-1],
                enrichment_ratio=ratio,
                increments=increments,
            )
        )
        logger.debug(f"Mode {index}: {iterations} ADS iterations, increment {increments[-1]:.2e}, ratio {ratio:.2e}")
        if n_modes is None and index >= 2 and ratio <= tol_e:
            report.stopped_by = "enrichment"
            break
    else:
        report.stopped_by = "fixed_modes" if n_modes is not None else "max_modes"
    return modes, report


# ---------------------------------------------------------------------------
# Non-parametric (x, y) solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ModePair:
    ux: DenseVector
    uy: DenseVector


@dataclass(eq=False)
class PGDSolution:
    x_grid: Grid1D
    y_grid: Grid1D
    modes: List[ModePair]
    lift: List[ModePair] = field(default_factory=list)
    report: Optional[ADSReport] = None

    @property
    def m(self) -> int:
        return len(self.modes)


def _free_indices(n: int, first_fixed: bool, last_fixed: bool) -> np.ndarray:
    idx = np.arange(n)
    keep = np.ones(n, dtype=bool)
    keep[0] = not first_fixed
    keep[-1] = keep[-1] and not last_fixed
    return idx[keep]


def _unit(n: int, index: int) -> DenseVector:
    e = np.zeros(n)
    e[index] = 1.0
    return e


def side_lifts(problem: ProblemSpec, x_grid: Grid1D, y_grid: Grid1D) -> List[Tuple[DenseVector, DenseVector]]:
    """One rank-1 lift per nonhomogeneous Dirichlet side: boundary hat times nodal data."""
    xs, ys = x_grid.nodes, y_grid.nodes
    nx, ny = x_grid.n_nodes, y_grid.n_nodes
    lifts = []
    placements = {
        "left": lambda g: (_unit(nx, 0), g(ys)),
        "right": lambda g: (_unit(nx, nx - 1), g(ys)),
        "bottom": lambda g: (g(xs), _unit(ny, 0)),
        "top": lambda g: (g(xs), _unit(ny, ny - 1)),
    }
    for side, place in placements.items():
        cond = problem.bc.side(side)
        if cond.is_dirichlet and not cond.is_homogeneous:
            lx, ly = place(cond.data)
            lifts.append((np.asarray(lx, dtype=float), np.asarray(ly, dtype=float)))
    return lifts


def spatial_operators(x_grid: Grid1D, y_grid: Grid1D):
    """1D matrices per axis: (M, K, C) for x and for y."""
    mats_x = tuple(f(x_grid) for f in (assemble_mass_1d, assemble_stiffness_1d, assemble_convection_1d))
    mats_y = tuple(f(y_grid) for f in (assemble_mass_1d, assemble_stiffness_1d, assemble_convection_1d))
    return mats_x, mats_y


def spatial_free(problem: ProblemSpec, x_grid: Grid1D, y_grid: Grid1D) -> Tuple[np.ndarray, np.ndarray]:
    bc = problem.bc
    return (
        _free_indices(x_grid.n_nodes, bc.left.is_dirichlet, bc.right.is_dirichlet),
        _free_indices(y_grid.n_nodes, bc.bottom.is_dirichlet, bc.top.is_dirichlet),
    )


def build_separated_problem(problem: ProblemSpec, x_grid: Grid1D, y_grid: Grid1D) -> SeparatedProblem:
    issues = validate_problem(problem, "pgd")
    if issues:
        raise InvalidArgumentError("; ".join(issues))
    (Mx, Kx, Cx), (My, Ky, Cy) = spatial_operators(x_grid, y_grid)
    mu = problem.mu_value
    bx, by = problem.b
    terms = [(mu, (Kx, My)), (mu, (Mx, Ky))]
    if bx != 0.0:
        terms.append((bx, (Cx, My)))
    if by != 0.0:
        terms.append((by, (Mx, Cy)))
    loads = tuple(
        (assemble_load_1d(x_grid, term.fx), assemble_load_1d(y_grid, term.fy)) for term in problem.f.terms
    )
    return SeparatedProblem(
        terms=tuple(terms),
        loads=loads,
        lifts=tuple(side_lifts(problem, x_grid, y_grid)),
        norm_masses=(Mx, My),
        free=spatial_free(problem, x_grid, y_grid),
    )


def ads_halfstep_x(
    sp: SeparatedProblem, uy: DenseVector, previous: Sequence[ModePair] = ()
) -> DenseVector:
    """New ux for a frozen uy."""
    return direction_update(sp, [np.zeros(sp.size(0)), uy], [(p.ux, p.uy) for p in previous], 0)


def ads_halfstep_y(
    sp: SeparatedProblem, ux: DenseVector, previous: Sequence[ModePair] = ()
) -> Tuple[DenseVector, DenseVector]:
    """New uy for a frozen ux, returned as (ux, uy) with uy at unit norm.

    A zero result (nothing left to capture) is returned unnormalized.
    """
    factors = [ux.copy(), direction_update(sp, [ux, np.zeros(sp.size(1))], [(p.ux, p.uy) for p in previous], 1)]
    if np.any(factors[1]):
        normalize_factor(sp, factors, 1)
    return factors[0], factors[1]


def pgd_enrich(
    sp: SeparatedProblem,
    previous: Sequence[ModePair],
    tol_fp: float,
    max_fp: int = MAX_FP,
    initial_scale: float = 1.0,
) -> Tuple[ModePair, int, float]:
    """Compute the next mode pair; returns (pair, iterations, final increment)."""
    factors, iterations, increments = ads_fixed_point(
        sp, [(p.ux, p.uy) for p in previous], tol_fp, max_fp, initial_scale
    )
    return ModePair(factors[0], factors[1]), iterations, increments[-1]


def pgd_solve(
    problem: ProblemSpec,
    x_grid: Grid1D,
    y_grid: Grid1D,
    tol_e: float = 8e-3,
    tol_fp: float = 1e-2,
    max_modes: int = MAX_MODES,
    n_modes: Optional[int] = None,
    max_fp: int = MAX_FP,
    initial_scale: float = 1.0,
) -> PGDSolution:
    """Greedy PGD for a constant-mu problem on tensor grids x_grid, y_grid."""
    start = time.perf_counter()
    sp = build_separated_problem(problem, x_grid, y_grid)
    modes, report = greedy_enrichment(sp, tol_e, tol_fp, max_modes, n_modes, max_fp, initial_scale)
    logger.info(
        f"PGD finished: {len(modes)} modes, ADS iterations {report.iterations}, "
        f"stopped by {report.stopped_by} in {time.perf_counter() - start:.3f}s"
    )
    return PGDSolution(
        x_grid=x_grid,
        y_grid=y_grid,
        modes=[ModePair(f[0], f[1]) for f in modes],
        lift=[ModePair(lx, ly) for lx, ly in sp.lifts],
        report=report,
    )


def pgd_evaluate(sol: PGDSolution, grid2d: Grid2D) -> Field2D:
    """Nodal values of lift + sum_k ux_k(x) uy_k(y) with P1 interpolation per axis."""
    Px = sol.x_grid.interpolation_matrix(grid2d.x_grid.nodes)
    Py = sol.y_grid.interpolation_matrix(grid2d.y_grid.nodes)
    values = np.zeros(grid2d.shape)
    for pair in list(sol.lift) + list(sol.modes):
        values += np.outer(Px @ pair.ux, Py @ pair.uy)
    return Field2D(grid2d, values)
