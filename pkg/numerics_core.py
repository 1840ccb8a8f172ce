"""
Dense Linear Algebra and Quadrature Primitives

This module holds the numerical building blocks shared by every solver in
varsep-mor. It carries no knowledge of the PDE: matrices and vectors are plain
numpy arrays, and the helpers below add the contracts the solvers rely on.

Key Features:
- **Gauss-Legendre rules**: nodes by Newton iteration on the Legendre
  three-term recurrence, cached per point count
- **Composite rules**: Gauss-Legendre repeated over uniform subintervals
- **Pivoted dense solves**: LU with row pivoting and an explicit
  singular-pivot check
- **Symmetric eigenproblems**: cyclic Jacobi rotations, eigenpairs sorted
  in descending order
- **Column orthogonalization**: one-sided (Hestenes) Jacobi rotations used to
  sharpen singular values obtained from a Gram matrix

Every function is pure; returned rules are immutable and safe to share.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from errors import InvalidArgumentError, NonConvergenceError, SingularMatrixError

logger = logging.getLogger(__name__)

# numpy arrays play the DenseMatrix / DenseVector roles throughout
DenseMatrix = np.ndarray
DenseVector = np.ndarray

NEWTON_TOL = 1e-14
PIVOT_TOL = 1e-14
JACOBI_TOL = 1e-12
MAX_JACOBI_SWEEPS = 100


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule on the reference interval [-1, 1].

    Attributes:
        nodes: Strictly increasing nodes in (-1, 1)
        weights: Positive weights summing to 2
    """

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    def mapped(self, a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
        """Return nodes and weights affinely mapped onto [a, b]."""
        half = 0.5 * (b - a)
        return 0.5 * (a + b) + half * self.nodes, half * self.weights

    def integrate(self, func, a: float = -1.0, b: float = 1.0) -> float:
        nodes, weights = self.mapped(a, b)
        return float(np.dot(weights, func(nodes)))


def _legendre_pair(x: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Return (P_n(x), P_n'(x)) from the three-term recurrence."""
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    return p, n * (x * p - p_prev) / (x * x - 1.0)


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> QuadratureRule:
    """Build the n-point Gauss-Legendre rule.

    The roots of P_n are refined by Newton's method starting from the
    guess cos(pi (i + 3/4) / (n + 1/2)); P_n and P_n' come from the
    three-term recurrence.

    Args:
        n: Number of points, at least 1

    Returns:
        QuadratureRule exact for polynomials of degree <= 2n - 1

    Raises:
        InvalidArgumentError: If n < 1
    """
    if n < 1:
        raise InvalidArgumentError(f"quadrature point count must be >= 1, got {n}")

    x = np.cos(np.pi * (np.arange(n) + 0.75) / (n + 0.5))
    step = np.full_like(x, np.inf)
    for _ in range(100):
        p, dp = _legendre_pair(x, n)
        step = p / dp
        x = x - step
        if np.max(np.abs(step)) < NEWTON_TOL:
            break
    else:  # pragma: no cover
        raise NonConvergenceError("Gauss-Legendre Newton iteration stalled", float(np.max(np.abs(step))), 100)

    _, dp = _legendre_pair(x, n)
    weights = 2.0 / ((1.0 - x * x) * dp * dp)

    order = np.argsort(x)
    nodes = x[order]
    weights = weights[order]
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes=nodes, weights=weights)


def composite_gauss(a: float, b: float, n_sub: int, n_points: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule repeated over n_sub uniform subintervals of [a, b]."""
    if n_sub < 1:
        raise InvalidArgumentError(f"subinterval count must be >= 1, got {n_sub}")
    rule = gauss_legendre(n_points)
    edges = np.linspace(a, b, n_sub + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * rule.nodes[None, :]).ravel()
    weights = (half[:, None] * rule.weights[None, :]).ravel()
    return nodes, weights


def solve_dense(A: DenseMatrix, b: DenseVector) -> DenseVector:
    """Solve A x = b by LU factorization with row pivoting.

    Args:
        A: Square matrix
        b: Right-hand side with len(b) == A.shape[0]

    Returns:
        Solution vector x

    Raises:
        InvalidArgumentError: On shape mismatch or non-finite input
        SingularMatrixError: If some pivot satisfies |pivot| < 1e-14 * max|A|
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgumentError(f"matrix must be square, got shape {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise InvalidArgumentError(f"right-hand side length {b.shape[0]} does not match {A.shape[0]}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise InvalidArgumentError("system contains non-finite entries")

    scale = float(np.max(np.abs(A))) if A.size else 0.0
    if scale == 0.0:
        raise SingularMatrixError("matrix is identically zero")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    worst = int(np.argmin(pivots))
    if pivots[worst] < PIVOT_TOL * scale:
        raise SingularMatrixError(
            f"numerically singular pivot {pivots[worst]:.3e} at row {worst} (max|A| = {scale:.3e})"
        )
    return lu_solve((lu, piv), b, check_finite=False)


def _off_diagonal_norm(a: np.ndarray) -> float:
    upper = np.triu(a, 1)
    return math.sqrt(2.0 * float(np.sum(upper * upper)))


def sym_eigen_descending(G: DenseMatrix) -> Tuple[DenseVector, DenseMatrix]:
    """Eigen-decompose a symmetric matrix with cyclic Jacobi rotations.

    Sweeps over all (p, q) pairs until the off-diagonal Frobenius norm drops
    below 1e-12 * ||G||_F.

    Args:
        G: Symmetric matrix (within 1e-12 relative)

    Returns:
        (values, vectors) with values descending and orthonormal eigenvector
        columns

    Raises:
        InvalidArgumentError: If G is not square or not symmetric
        NonConvergenceError: If the sweep cap is reached
    """
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise InvalidArgumentError(f"matrix must be square, got shape {G.shape}")
    norm = float(np.linalg.norm(G))
    if np.linalg.norm(G - G.T) > JACOBI_TOL * max(norm, np.finfo(float).tiny):
        raise InvalidArgumentError("matrix is not symmetric")

    n = G.shape[0]
    a = 0.5 * (G + G.T)
    v = np.eye(n)
    threshold = JACOBI_TOL * norm

    sweeps = 0
    off = _off_diagonal_norm(a)
    while off > threshold:
        if sweeps >= MAX_JACOBI_SWEEPS:
            raise NonConvergenceError("Jacobi eigen sweeps did not converge", off, sweeps)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
        sweeps += 1
        off = _off_diagonal_norm(a)

    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    logger.debug(f"Jacobi eigen converged in {sweeps} sweeps (n={n})")
    return values[order], v[:, order]


def one_sided_jacobi(W: DenseMatrix, tol: float = 1e-13, max_sweeps: int = 60) -> Tuple[DenseMatrix, DenseMatrix]:
    """Orthogonalize the columns of W by one-sided Jacobi rotations.

    Returns (W R, R) with R orthogonal and the columns of W R mutually
    orthogonal within tol (relative to their norms). The column norms of W R
    are the singular values of W; no cross-product matrix is formed, so small
    singular values keep their absolute accuracy.
    """
    w = np.array(W, dtype=float, copy=True)
    n = w.shape[1]
    r = np.eye(n)
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = float(np.dot(w[:, p], w[:, p]))
                beta = float(np.dot(w[:, q], w[:, q]))
                gamma = float(np.dot(w[:, p], w[:, q]))
                if alpha == 0.0 or beta == 0.0 or abs(gamma) <= tol * math.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                col_p = w[:, p].copy()
                col_q = w[:, q].copy()
                w[:, p] = c * col_p - s * col_q
                w[:, q] = s * col_p + c * col_q
                rot_p = r[:, p].copy()
                rot_q = r[:, q].copy()
                r[:, p] = c * rot_p - s * rot_q
                r[:, q] = s * rot_p + c * rot_q
        if not rotated:
            logger.debug(f"one-sided Jacobi converged after {sweep + 1} sweeps")
            return w, r
    raise NonConvergenceError("one-sided Jacobi did not converge", tol, max_sweeps)
