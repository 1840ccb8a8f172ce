"""
Finite-Element Core

1D P1 assembly on uniform interval grids, plus the full-order Q1 reference
solver for the 2D advection-diffusion problem. The reduced solvers reuse the
1D matrices directly; the 2D solver builds its operator as Kronecker products
of the same 1D matrices, so every route shares one discretization.

Matrix conventions (row = test index i, column = trial index l):
    M[i, l] = int theta_i theta_l
    K[i, l] = int theta_i' theta_l'
    C[i, l] = int theta_l' theta_i
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from errors import InvalidArgumentError, SingularMatrixError
from numerics_core import DenseMatrix, DenseVector, gauss_legendre
from problem_model import ProblemSpec, validate_problem

logger = logging.getLogger(__name__)

LOAD_POINTS = 5
RESIDUAL_BOUND = 1e-10


@dataclass(frozen=True)
class Grid1D:
    """Uniform partition of [a, b] into n_elems elements."""

    a: float
    b: float
    n_elems: int

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise InvalidArgumentError(f"grid needs a < b, got [{self.a}, {self.b}]")
        if self.n_elems < 1:
            raise InvalidArgumentError(f"grid needs at least one element, got {self.n_elems}")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n_elems

    @property
    def n_nodes(self) -> int:
        return self.n_elems + 1

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.n_nodes)

    @property
    def length(self) -> float:
        return self.b - self.a

    def interpolation_matrix(self, points) -> DenseMatrix:
        """Matrix P with (P @ values)[q] = P1 interpolant of nodal values at points[q].

        Raises:
            InvalidArgumentError: If a point lies outside [a, b]
        """
        points = np.atleast_1d(np.asarray(points, dtype=float))
        slack = 1e-12 * self.length
        if np.any(points < self.a - slack) or np.any(points > self.b + slack):
            raise InvalidArgumentError(f"evaluation point outside [{self.a}, {self.b}]")
        s = np.clip((points - self.a) / self.h, 0.0, float(self.n_elems))
        elem = np.minimum(np.floor(s).astype(int), self.n_elems - 1)
        local = s - elem
        rows = np.arange(points.size)
        P = np.zeros((points.size, self.n_nodes))
        P[rows, elem] = 1.0 - local
        P[rows, elem + 1] += local
        return P


@dataclass(frozen=True)
class Grid2D:
    x_grid: Grid1D
    y_grid: Grid1D

    @property
    def shape(self) -> Tuple[int, int]:
        return self.x_grid.n_nodes, self.y_grid.n_nodes

    @classmethod
    def for_problem(cls, problem: ProblemSpec, nx: int, ny: int) -> "Grid2D":
        d = problem.domain
        return cls(Grid1D(d.x0, d.x1, nx), Grid1D(d.y0, d.y1, ny))


@dataclass(frozen=True, eq=False)
class Field2D:
    """Nodal values on a Grid2D; values[i, j] sits at (x_i, y_j), flattened x-major."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != self.grid.shape:
            raise InvalidArgumentError(f"field shape {self.values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgumentError("field contains non-finite values")

    @classmethod
    def zeros(cls, grid: Grid2D) -> "Field2D":
        return cls(grid, np.zeros(grid.shape))

    def flat(self) -> DenseVector:
        return self.values.ravel()

    def l2_norm(self) -> float:
        return math.sqrt(_bilinear_l2_squared(self.grid, self.values))


# ---------------------------------------------------------------------------
# 1D assembly
# ---------------------------------------------------------------------------

def _assemble(grid: Grid1D, local: np.ndarray) -> DenseMatrix:
    n = grid.n_nodes
    A = np.zeros((n, n))
    for e in range(grid.n_elems):
        A[e:e + 2, e:e + 2] += local
    return A


def assemble_mass_1d(grid: Grid1D) -> DenseMatrix:
    h = grid.h
    return _assemble(grid, h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]]))


def assemble_stiffness_1d(grid: Grid1D) -> DenseMatrix:
    return _assemble(grid, np.array([[1.0, -1.0], [-1.0, 1.0]]) / grid.h)


def assemble_convection_1d(grid: Grid1D) -> DenseMatrix:
    """C[i, l] = int theta_l' theta_i; interior rows read [-1/2, 0, 1/2]."""
    return _assemble(grid, 0.5 * np.array([[-1.0, 1.0], [-1.0, 1.0]]))


def assemble_weighted_mass_1d(grid: Grid1D, weight: Callable, n_points: int = 3) -> DenseMatrix:
    """Mass matrix with a weight, int w theta_i theta_l, by per-element Gauss quadrature."""
    rule = gauss_legendre(n_points)
    n = grid.n_nodes
    A = np.zeros((n, n))
    nodes = grid.nodes
    for e in range(grid.n_elems):
        pts, wts = rule.mapped(nodes[e], nodes[e + 1])
        s = (pts - nodes[e]) / grid.h
        phi = np.vstack([1.0 - s, s])
        w = wts * np.asarray(weight(pts), dtype=float)
        A[e:e + 2, e:e + 2] += (phi * w) @ phi.T
    return A


def assemble_load_1d(grid: Grid1D, g: Callable, n_points: int = LOAD_POINTS) -> DenseVector:
    """Load vector int g theta_i with an n_points Gauss rule per element."""
    rule = gauss_legendre(n_points)
    f = np.zeros(grid.n_nodes)
    nodes = grid.nodes
    for e in range(grid.n_elems):
        pts, wts = rule.mapped(nodes[e], nodes[e + 1])
        s = (pts - nodes[e]) / grid.h
        gw = wts * np.asarray(g(pts), dtype=float)
        f[e] += float(np.dot(gw, 1.0 - s))
        f[e + 1] += float(np.dot(gw, s))
    return f


# ---------------------------------------------------------------------------
# Full-order Q1 reference solver
# ---------------------------------------------------------------------------

def mesh_peclet(problem: ProblemSpec, grid: Grid2D) -> float:
    bx, by = problem.b
    return max(abs(bx) * grid.x_grid.h, abs(by) * grid.y_grid.h) / (2.0 * problem.mu_value)


def _check_grid_matches(problem: ProblemSpec, grid: Grid2D) -> None:
    d = problem.domain
    expected = (d.x0, d.x1, d.y0, d.y1)
    actual = (grid.x_grid.a, grid.x_grid.b, grid.y_grid.a, grid.y_grid.b)
    scale = max(abs(v) for v in expected) or 1.0
    if any(abs(e - a) > 1e-12 * scale for e, a in zip(expected, actual)):
        raise InvalidArgumentError(f"grid extent {actual} does not match problem domain {expected}")


def dirichlet_values(problem: ProblemSpec, grid: Grid2D) -> Tuple[np.ndarray, np.ndarray]:
    """Boolean mask and values of Dirichlet-constrained nodes.

    Top and bottom data are written first, left and right afterwards, so at a
    corner shared by two Dirichlet sides the inlet/outlet value wins.
    """
    xs, ys = grid.x_grid.nodes, grid.y_grid.nodes
    mask = np.zeros(grid.shape, dtype=bool)
    values = np.zeros(grid.shape)
    bc = problem.bc
    if bc.bottom.is_dirichlet:
        mask[:, 0] = True
        values[:, 0] = bc.bottom.data(xs)
    if bc.top.is_dirichlet:
        mask[:, -1] = True
        values[:, -1] = bc.top.data(xs)
    if bc.left.is_dirichlet:
        mask[0, :] = True
        values[0, :] = bc.left.data(ys)
    if bc.right.is_dirichlet:
        mask[-1, :] = True
        values[-1, :] = bc.right.data(ys)
    return mask, values


def fe2d_operator(problem: ProblemSpec, grid: Grid2D) -> sp.csr_matrix:
    """Q1 operator mu (K^x (x) M^y + M^x (x) K^y) + b_x C^x (x) M^y + b_y M^x (x) C^y."""
    gx, gy = grid.x_grid, grid.y_grid
    Mx, Kx, Cx = (sp.csr_matrix(f(gx)) for f in (assemble_mass_1d, assemble_stiffness_1d, assemble_convection_1d))
    My, Ky, Cy = (sp.csr_matrix(f(gy)) for f in (assemble_mass_1d, assemble_stiffness_1d, assemble_convection_1d))
    mu = problem.mu_value
    bx, by = problem.b
    A = mu * (sp.kron(Kx, My) + sp.kron(Mx, Ky))
    if bx != 0.0:
        A = A + bx * sp.kron(Cx, My)
    if by != 0.0:
        A = A + by * sp.kron(Mx, Cy)
    return A.tocsr()


def fe2d_load(problem: ProblemSpec, grid: Grid2D) -> DenseVector:
    """Separable load: sum over forcing terms of (int fx theta_i) (x) (int fy theta_j)."""
    F = np.zeros(grid.shape)
    for term in problem.f.terms:
        F += np.outer(assemble_load_1d(grid.x_grid, term.fx), assemble_load_1d(grid.y_grid, term.fy))
    return F.ravel()


def fe2d_solve(problem: ProblemSpec, grid: Grid2D) -> Field2D:
    """Bilinear Galerkin reference solution on a structured grid.

    Dirichlet data are imposed by eliminating constrained rows and columns and
    lifting their values into the right-hand side; homogeneous Neumann sides
    are natural.

    Raises:
        InvalidArgumentError: If the problem is parametric or ill posed, or
            the grid does not cover its domain
        SingularMatrixError: If the reduced system cannot be factored or its
            residual exceeds RESIDUAL_BOUND
    """
    issues = validate_problem(problem, "fe")
    if issues:
        raise InvalidArgumentError("; ".join(issues))
    _check_grid_matches(problem, grid)

    peclet = mesh_peclet(problem, grid)
    if peclet > 1.0:
        logger.warning(f"Mesh Peclet number {peclet:.3f} exceeds 1; Galerkin solution may oscillate")

    A = fe2d_operator(problem, grid)
    F = fe2d_load(problem, grid)
    mask, fixed = dirichlet_values(problem, grid)
    constrained = np.flatnonzero(mask.ravel())
    free = np.flatnonzero(~mask.ravel())
    u = fixed.ravel().copy()

    rhs = F[free] - A[free][:, constrained] @ u[constrained]
    A_ff = A[free][:, free].tocsc()
    try:
        lu = splu(A_ff)
    except RuntimeError as exc:
        raise SingularMatrixError(f"reference system is singular: {exc}") from exc
    if np.any(rhs):
        u[free] = lu.solve(rhs)
        residual = np.linalg.norm(A_ff @ u[free] - rhs) / np.linalg.norm(rhs)
        if not residual <= RESIDUAL_BOUND:
            raise SingularMatrixError(
                f"reference solve relative residual {residual:.2e} above {RESIDUAL_BOUND:.0e}"
            )
    else:
        u[free] = 0.0

    logger.info(
        f"FE reference solved: {grid.shape[0]}x{grid.shape[1]} nodes, {free.size} unknowns, Pe_h={peclet:.3g}"
    )
    return Field2D(grid, u.reshape(grid.shape))


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

def _bilinear_l2_squared(grid: Grid2D, values: np.ndarray) -> float:
    """Squared L2 norm of the bilinear interpolant with 2x2 Gauss per cell."""
    g = 1.0 / math.sqrt(3.0)
    pts = (0.5 * (1.0 - g), 0.5 * (1.0 + g))
    v00, v10 = values[:-1, :-1], values[1:, :-1]
    v01, v11 = values[:-1, 1:], values[1:, 1:]
    total = 0.0
    for s in pts:
        for t in pts:
            q = (1 - s) * (1 - t) * v00 + s * (1 - t) * v10 + (1 - s) * t * v01 + s * t * v11
            total += float(np.sum(q * q))
    # each of the four points carries weight 1/4 of the cell area
    return total * 0.25 * grid.x_grid.h * grid.y_grid.h


def relative_l2_error(u: Field2D, ref: Field2D) -> float:
    """||u - ref||_L2 / ||ref||_L2 over the shared grid.

    Raises:
        InvalidArgumentError: If the two fields live on different grids
        ZeroDivisionError: If ref has zero norm
    """
    if u.grid != ref.grid:
        raise InvalidArgumentError("fields must share a grid; evaluate on the reference grid first")
    ref_sq = _bilinear_l2_squared(ref.grid, ref.values)
    if ref_sq == 0.0:
        raise ZeroDivisionError("reference field has zero L2 norm")
    return math.sqrt(_bilinear_l2_squared(ref.grid, u.values - ref.values) / ref_sq)


def field_from_function(grid: Grid2D, func: Callable, mu: Optional[float] = None) -> Field2D:
    """Sample func(x, y) at every node."""
    X, Y = np.meshgrid(grid.x_grid.nodes, grid.y_grid.nodes, indexing="ij")
    values = func(X, Y) if mu is None else func(X, Y, mu)
    return Field2D(grid, np.asarray(values, dtype=float))
