"""
Hierarchical Model (HiMod) Reduction

The solution is expanded as u(x, y) = sum_k u_k(x) phi_k(yhat) with P1 finite
elements along the supporting fiber (x) and an L2-orthonormal sine basis
phi_k(yhat) = sqrt(2) sin(k pi yhat) across it, yhat = (y - y0) / L_y.
Transverse physics is lumped into constant m x m coefficient matrices
rhat[a, b] (a: derivative order on the trial hat, b: on the test hat), and
the mN_h unknowns are ordered mode by mode: [u_{1,1}, u_{1,2}, ..., u_{m,N_h}].

Key Features:
- **Quadrature-built coefficients**: rhat computed by composite Gauss-Legendre
  on the reference fiber; closed forms are kept for tests only
- **Inlet/outlet lifting**: Dirichlet data at x0 or x1 enters as the L2
  modal projection of the boundary profile
- **Affine split**: diffusion, advection and load parts assembled once so a
  parametric problem can be rebuilt at any mu by scaling
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from errors import IncompatibleBoundaryError, InvalidArgumentError, UnsupportedError
from fe_core import (
    Field2D,
    Grid1D,
    Grid2D,
    assemble_convection_1d,
    assemble_load_1d,
    assemble_mass_1d,
    assemble_stiffness_1d,
)
from numerics_core import DenseMatrix, DenseVector, composite_gauss, solve_dense
from problem_model import ProblemSpec, ScalarFunction1D, validate_problem

logger = logging.getLogger(__name__)

# composite rule on the reference fiber; resolves sine products up to m ~ 60
# and the sharpest gaussian profiles used in the experiments
TRANSVERSE_SUBINTERVALS = 32
TRANSVERSE_POINTS = 12


@dataclass(frozen=True)
class ModalBasis:
    """Sine modal basis of size m on the reference fiber (0, 1)."""

    m: int
    kind: str = "sine"

    def __post_init__(self) -> None:
        if self.m < 1:
            raise InvalidArgumentError(f"modal basis needs m >= 1, got {self.m}")
        if self.kind != "sine":
            raise UnsupportedError(f"modal basis '{self.kind}' is not available; only 'sine'")

    def values(self, yhat) -> Tuple[np.ndarray, np.ndarray]:
        """All modes at once: arrays of shape (len(yhat), m) for phi_k and phi_k'."""
        yhat = np.atleast_1d(np.asarray(yhat, dtype=float))
        k = np.arange(1, self.m + 1)
        arg = np.pi * np.outer(yhat, k)
        return math.sqrt(2.0) * np.sin(arg), math.sqrt(2.0) * np.pi * k * np.cos(arg)


def modal_eval(basis: ModalBasis, k: int, yhat):
    """Value and derivative of phi_k at yhat (scalar or array)."""
    if not 1 <= k <= basis.m:
        raise InvalidArgumentError(f"mode index {k} outside 1..{basis.m}")
    arg = k * np.pi * np.asarray(yhat, dtype=float)
    return math.sqrt(2.0) * np.sin(arg), math.sqrt(2.0) * k * np.pi * np.cos(arg)


def transverse_rule() -> Tuple[np.ndarray, np.ndarray]:
    return composite_gauss(0.0, 1.0, TRANSVERSE_SUBINTERVALS, TRANSVERSE_POINTS)


@dataclass(frozen=True, eq=False)
class RHatCoefficients:
    """Lumped transverse coefficients rhat[(a, b)], each m x m."""

    r00: DenseMatrix
    r01: DenseMatrix
    r10: DenseMatrix
    r11: DenseMatrix

    def __getitem__(self, key: Tuple[int, int]) -> DenseMatrix:
        return {(0, 0): self.r00, (0, 1): self.r01, (1, 0): self.r10, (1, 1): self.r11}[key]


def _transverse_moments(basis: ModalBasis):
    """Quadrature moments int phi_k phi_j, int phi_k' phi_j', int phi_k' phi_j, indexed [j, k]."""
    nodes, weights = transverse_rule()
    phi, dphi = basis.values(nodes)
    w = weights[:, None]
    mass = (phi * w).T @ phi
    stiff = (dphi * w).T @ dphi
    mixed = (phi * w).T @ dphi
    return mass, stiff, mixed


def rhat_from_coefficients(mu: float, b: Tuple[float, float], ly: float, basis: ModalBasis) -> RHatCoefficients:
    """rhat for mu Laplacian plus constant advection with the affine map yhat = (y - y0) / ly."""
    mass, stiff, mixed = _transverse_moments(basis)
    bx, by = b
    # J = ly, d yhat / dy = 1 / ly
    return RHatCoefficients(
        r00=mu * stiff / ly + by * mixed,
        r01=np.zeros_like(mass),
        r10=bx * ly * mass,
        r11=mu * ly * mass,
    )


def compute_rhat(problem: ProblemSpec, basis: ModalBasis, transverse_map: str = "affine") -> RHatCoefficients:
    if transverse_map != "affine":
        raise UnsupportedError(f"transverse map '{transverse_map}' is not supported; only 'affine'")
    return rhat_from_coefficients(problem.mu_value, problem.b, problem.domain.ly, basis)


def rhat_closed_form(mu: float, b: Tuple[float, float], ly: float, m: int) -> RHatCoefficients:
    """Analytic sine-basis coefficients, used to check the quadrature."""
    k = np.arange(1, m + 1)
    bx, by = b
    j = k[:, None]
    kk = k[None, :]
    # int_0^1 phi_k' phi_j = 2 k pi int cos(k pi t) sin(j pi t) = 4 j k / (j^2 - k^2) when j + k odd
    with np.errstate(divide="ignore", invalid="ignore"):
        mixed = np.where((j + kk) % 2 == 1, 4.0 * j * kk / (j * j - kk * kk), 0.0)
    return RHatCoefficients(
        r00=np.diag(mu * (k * np.pi) ** 2 / ly) + by * mixed,
        r01=np.zeros((m, m)),
        r10=bx * ly * np.eye(m),
        r11=mu * ly * np.eye(m),
    )


def himod_inlet_projection(
    g: Optional[ScalarFunction1D], basis: ModalBasis, fiber: Tuple[float, float] = (0.0, 1.0)
) -> DenseVector:
    """Modal coefficients int_0^1 g(y(yhat)) phi_k(yhat) dyhat of a side profile."""
    if g is None:
        return np.zeros(basis.m)
    nodes, weights = transverse_rule()
    y = fiber[0] + (fiber[1] - fiber[0]) * nodes
    phi, _ = basis.values(nodes)
    return phi.T @ (weights * np.asarray(g(y), dtype=float))


@dataclass(frozen=True, eq=False)
class HiModSolution:
    """Coefficients u[k - 1, l] of mode k at fiber node l."""

    grid: Grid1D
    basis: ModalBasis
    coeffs: DenseMatrix
    fiber: Tuple[float, float]

    def __post_init__(self) -> None:
        if self.coeffs.shape != (self.basis.m, self.grid.n_nodes):
            raise InvalidArgumentError(
                f"coefficient shape {self.coeffs.shape} does not match m={self.basis.m}, N_h={self.grid.n_nodes}"
            )

    @property
    def vector(self) -> DenseVector:
        return self.coeffs.ravel()

    @classmethod
    def from_vector(cls, vector, grid: Grid1D, basis: ModalBasis, fiber: Tuple[float, float]) -> "HiModSolution":
        return cls(grid, basis, np.asarray(vector, dtype=float).reshape(basis.m, grid.n_nodes), fiber)


@dataclass(frozen=True, eq=False)
class HiModParts:
    """Affine pieces of the unconstrained system: A(mu) = mu * diffusion + advection.

    loads holds (vector, fmu) pairs; fmu is None for mu-independent terms.
    """

    diffusion: DenseMatrix
    advection: DenseMatrix
    loads: Tuple[Tuple[DenseVector, Optional[ScalarFunction1D]], ...]
    constrained: np.ndarray
    prescribed: DenseVector

    def matrix(self, mu: float) -> DenseMatrix:
        return mu * self.diffusion + self.advection

    def load(self, mu: Optional[float]) -> DenseVector:
        f = np.zeros(self.diffusion.shape[0])
        for vector, fmu in self.loads:
            if fmu is None:
                f = f + vector
            else:
                if mu is None:
                    raise InvalidArgumentError("forcing depends on mu but no mu was supplied")
                f = f + float(fmu(mu)) * vector
        return f

    @property
    def lift(self) -> DenseVector:
        """Vector holding the prescribed values on constrained entries and zero elsewhere."""
        u = np.zeros(self.diffusion.shape[0])
        u[self.constrained] = self.prescribed
        return u


def _check_fiber(problem: ProblemSpec, grid: Grid1D) -> None:
    d = problem.domain
    scale = max(abs(d.x0), abs(d.x1), 1.0)
    if abs(grid.a - d.x0) > 1e-12 * scale or abs(grid.b - d.x1) > 1e-12 * scale:
        raise InvalidArgumentError(f"fiber grid [{grid.a}, {grid.b}] does not match domain x-extent [{d.x0}, {d.x1}]")


def himod_parts(problem: ProblemSpec, basis: ModalBasis, grid: Grid1D) -> HiModParts:
    """Assemble the mu-affine pieces of the HiMod system for a (possibly parametric) problem."""
    issues = validate_problem(problem, "hipod" if problem.is_parametric else "himod")
    if issues:
        raise IncompatibleBoundaryError("; ".join(issues))
    _check_fiber(problem, grid)

    ly = problem.domain.ly
    fiber = (problem.domain.y0, problem.domain.y1)
    diff = rhat_from_coefficients(1.0, (0.0, 0.0), ly, basis)
    adv = rhat_from_coefficients(0.0, problem.b, ly, basis)

    M = assemble_mass_1d(grid)
    K = assemble_stiffness_1d(grid)
    C = assemble_convection_1d(grid)
    # 1D matrix for each (a, b), indexed [i, l]
    fe = {(0, 0): M, (1, 1): K, (1, 0): C, (0, 1): C.T}

    size = basis.m * grid.n_nodes

    def block(r: RHatCoefficients) -> DenseMatrix:
        A = np.zeros((size, size))
        for key, matrix in fe.items():
            if np.any(r[key]):
                A += np.kron(r[key], matrix)
        return A

    nodes, weights = transverse_rule()
    phi, _ = basis.values(nodes)
    y = fiber[0] + ly * nodes
    loads: List[Tuple[DenseVector, Optional[ScalarFunction1D]]] = []
    for term in problem.f.terms:
        fy_moments = ly * (phi.T @ (weights * np.asarray(term.fy(y), dtype=float)))
        loads.append((np.kron(fy_moments, assemble_load_1d(grid, term.fx)), term.fmu))

    n = grid.n_nodes
    constrained: List[int] = []
    prescribed: List[float] = []
    for side, node in (("left", 0), ("right", n - 1)):
        cond = problem.bc.side(side)
        if cond.is_dirichlet:
            values = himod_inlet_projection(cond.g, basis, fiber)
            constrained.extend(k * n + node for k in range(basis.m))
            prescribed.extend(values)

    return HiModParts(
        diffusion=block(diff),
        advection=block(adv),
        loads=tuple(loads),
        constrained=np.asarray(constrained, dtype=int),
        prescribed=np.asarray(prescribed, dtype=float),
    )


def eliminate_dirichlet(A: DenseMatrix, f: DenseVector, idx: np.ndarray, values: DenseVector):
    """Symmetric elimination: zero constrained rows and columns, unit diagonal, lifted rhs."""
    A = A.copy()
    f = f - A[:, idx] @ values
    A[idx, :] = 0.0
    A[:, idx] = 0.0
    A[idx, idx] = 1.0
    f[idx] = values
    return A, f


def himod_assemble(problem: ProblemSpec, basis: ModalBasis, grid: Grid1D) -> Tuple[DenseMatrix, DenseVector]:
    """HiMod matrix and load for a constant-mu problem, Dirichlet ends eliminated."""
    if problem.is_parametric:
        raise InvalidArgumentError("himod_assemble needs a constant diffusivity; use problem.at_mu(mu)")
    parts = himod_parts(problem, basis, grid)
    mu = problem.mu_value
    return eliminate_dirichlet(parts.matrix(mu), parts.load(None), parts.constrained, parts.prescribed)


def solve_parts(parts: HiModParts, mu: float) -> DenseVector:
    """Solve the constrained system at mu; constrained entries take their values exactly."""
    A = parts.matrix(mu)
    f = parts.load(mu)
    u = parts.lift
    idx = parts.constrained
    free = np.setdiff1d(np.arange(A.shape[0]), idx)
    if free.size:
        rhs = f[free] - A[np.ix_(free, idx)] @ parts.prescribed
        u[free] = solve_dense(A[np.ix_(free, free)], rhs)
    return u


def himod_solve(problem: ProblemSpec, basis: ModalBasis, grid: Grid1D) -> HiModSolution:
    if problem.is_parametric:
        raise InvalidArgumentError("himod_solve needs a constant diffusivity; use problem.at_mu(mu)")
    start = time.perf_counter()
    parts = himod_parts(problem, basis, grid)
    u = solve_parts(parts, problem.mu_value)
    logger.info(
        f"HiMod solved: m={basis.m}, N_h={grid.n_nodes}, {u.size} unknowns in {time.perf_counter() - start:.3f}s"
    )
    return HiModSolution.from_vector(u, grid, basis, (problem.domain.y0, problem.domain.y1))


def himod_evaluate(sol: HiModSolution, grid2d: Grid2D) -> Field2D:
    """Nodal values of sum_k sum_l u[k, l] theta_l(x) phi_k(yhat(y)) on grid2d."""
    Px = sol.grid.interpolation_matrix(grid2d.x_grid.nodes)
    y0, y1 = sol.fiber
    ys = grid2d.y_grid.nodes
    slack = 1e-12 * (y1 - y0)
    if np.any(ys < y0 - slack) or np.any(ys > y1 + slack):
        raise InvalidArgumentError(f"evaluation point outside transverse fiber [{y0}, {y1}]")
    phi, _ = sol.basis.values(np.clip((ys - y0) / (y1 - y0), 0.0, 1.0))
    return Field2D(grid2d, (Px @ sol.coeffs.T) @ phi.T)


def himod_relative_l2(u: HiModSolution, ref: HiModSolution) -> float:
    """Exact L2(Omega) relative distance between two HiMod solutions on one fiber grid.

    Uses ||sum_k u_k phi_k||^2 = L_y sum_k u_k^T M u_k.
    """
    if u.grid != ref.grid or u.basis != ref.basis:
        raise InvalidArgumentError("HiMod solutions must share grid and basis")
    M = assemble_mass_1d(ref.grid)
    diff = u.coeffs - ref.coeffs
    num = float(np.einsum("kl,lp,kp->", diff, M, diff))
    den = float(np.einsum("kl,lp,kp->", ref.coeffs, M, ref.coeffs))
    if den == 0.0:
        raise ZeroDivisionError("reference HiMod solution has zero L2 norm")
    return math.sqrt(num / den)


def himod_energy(sol: HiModSolution, problem: ProblemSpec) -> float:
    """Discrete energy a(u_m, u_m) = U^T A U of the unconstrained operator."""
    parts = himod_parts(problem, sol.basis, sol.grid)
    u = sol.vector
    return float(u @ parts.matrix(problem.mu_value) @ u)


def solve_by_mode(problem: ProblemSpec, basis: ModalBasis, grid: Grid1D) -> Optional[HiModSolution]:
    """Solve each mode's N_h block separately; valid when every rhat matrix is diagonal.

    Returns None when the operator couples modes (b_y != 0).
    """
    if problem.b[1] != 0.0:
        return None
    parts = himod_parts(problem, basis, grid)
    n = grid.n_nodes
    A = parts.matrix(problem.mu_value)
    f = parts.load(None)
    full = parts.lift
    constrained = set(parts.constrained.tolist())
    for k in range(basis.m):
        rows = np.arange(k * n, (k + 1) * n)
        fixed = np.array([r for r in rows if r in constrained], dtype=int)
        free = np.array([r for r in rows if r not in constrained], dtype=int)
        rhs = f[free] - A[np.ix_(free, fixed)] @ full[fixed]
        full[free] = solve_dense(A[np.ix_(free, free)], rhs)
    return HiModSolution.from_vector(full, grid, basis, (problem.domain.y0, problem.domain.y1))
