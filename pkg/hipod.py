"""
HiPOD: POD over HiMod Snapshots

Offline: solve the HiMod system at P parameter samples, stack the coefficient
vectors as columns of S, remove the column mean and extract an orthonormal
basis from the centered matrix by the method of snapshots. Online: Galerkin
projection of the HiMod system at a new mu onto the first l basis vectors.

Key Features:
- **Concurrent snapshots**: every sample is an independent HiMod solve run in
  a worker thread; columns are placed by sample index
- **Sharpened singular values**: the Gram eigenvectors are polished with
  one-sided Jacobi so sigma^2 stays meaningful far below machine precision
  relative to sigma_1^2
- **Two online paths**: literal reassembly at mu, or affine reuse of projected
  diffusion/advection blocks precomputed offline
- **Mean offset**: online solutions live in mean + span(Phi); prescribed
  inlet/outlet coefficients are shared by all snapshots, so the mean carries
  them and the centered basis vanishes there
"""

import asyncio
import logging
import math
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from errors import DegenerateModeError, InvalidArgumentError, OutOfRangeError
from himod import HiModParts, HiModSolution, ModalBasis, himod_assemble, himod_parts, himod_solve
from fe_core import Grid1D
from numerics_core import DenseMatrix, DenseVector, one_sided_jacobi, solve_dense, sym_eigen_descending
from problem_model import MuInterval, ProblemSpec, ScalarFunction1D

logger = logging.getLogger(__name__)

DROP_TOL = 1e-14
TRUNCATION_READINGS = ("retained", "literal")


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    samples: Tuple[float, ...]
    S: DenseMatrix

    def __post_init__(self) -> None:
        if self.S.shape[1] != len(self.samples):
            raise InvalidArgumentError(f"{self.S.shape[1]} snapshot columns for {len(self.samples)} samples")


@dataclass(frozen=True, eq=False)
class PODBasis:
    """Orthonormal POD basis of the centered snapshot matrix.

    Attributes:
        mean: Column average of S
        vectors: Every left singular vector above the drop tolerance
        sigma: Singular values, descending, length min(mN_h, P)
        right: Matching right singular vectors (P x len(vectors))
        l: Truncation level
        eps: Truncation tolerance
        reading: "retained" (count sigma^2 >= eps) or "literal" (first sigma^2 < eps)
        append_mean: Offset by the Dirichlet lift and append (mean - lift) as a basis direction
        lift: Prescribed values on constrained entries, zero elsewhere (zeros when absent)
        diagnostics: Findings worth reporting, e.g. a rank-0 fallback
    """

    mean: DenseVector
    vectors: DenseMatrix
    sigma: DenseVector
    right: DenseMatrix
    l: int
    eps: float
    reading: str = "retained"
    append_mean: bool = False
    lift: Optional[DenseVector] = None
    diagnostics: Tuple[str, ...] = ()

    @property
    def phi(self) -> DenseMatrix:
        return self.basis(self.l)

    @property
    def dirichlet_lift(self) -> DenseVector:
        return np.zeros_like(self.mean) if self.lift is None else self.lift

    @property
    def offset(self) -> DenseVector:
        """Affine offset of the reduced space; it holds the prescribed values."""
        return self.dirichlet_lift if self.append_mean else self.mean

    def basis(self, l: Optional[int] = None) -> DenseMatrix:
        """First l vectors, plus the normalized (mean - lift) direction when append_mean is set."""
        l = self.l if l is None else l
        if not 1 <= l <= self.vectors.shape[1]:
            raise InvalidArgumentError(f"basis size {l} outside 1..{self.vectors.shape[1]}")
        phi = self.vectors[:, :l]
        if not self.append_mean:
            return phi
        direction = self.mean - self.dirichlet_lift
        extra = direction - phi @ (phi.T @ direction)
        nrm = float(np.linalg.norm(extra))
        if nrm <= 1e-12 * max(float(np.linalg.norm(direction)), 1e-300):
            return phi
        return np.column_stack([phi, extra / nrm])


def uniform_samples(interval: MuInterval, count: int) -> List[float]:
    return [float(v) for v in np.linspace(interval.mu_min, interval.mu_max, count)]


def pod_truncate(sigma: Sequence[float], eps: float, reading: str = "retained") -> int:
    """Truncation level from descending singular values.

    retained: number of sigma_i with sigma_i^2 >= eps.
    literal: smallest 1-based l with sigma_l^2 < eps (len(sigma) when none).
    Both are clamped to at least 1.
    """
    if eps <= 0.0:
        raise InvalidArgumentError(f"truncation tolerance must be positive, got {eps}")
    if reading not in TRUNCATION_READINGS:
        raise InvalidArgumentError(f"unknown truncation reading '{reading}'")
    sq = np.asarray(sigma, dtype=float) ** 2
    below = np.flatnonzero(sq < eps)
    if reading == "retained":
        level = int(np.sum(sq >= eps))
    else:
        level = int(below[0]) + 1 if below.size else int(sq.size)
    return max(level, 1)


async def collect_snapshots_async(
    problem: ProblemSpec, basis: ModalBasis, grid: Grid1D, samples: Sequence[float]
) -> SnapshotSet:
    """HiMod solve per sample in worker threads; column i always belongs to samples[i]."""

    def solve_one(mu: float) -> DenseVector:
        return himod_solve(problem.at_mu(mu), basis, grid).vector

    columns = await asyncio.gather(*(asyncio.to_thread(solve_one, mu) for mu in samples))
    return SnapshotSet(samples=tuple(float(mu) for mu in samples), S=np.column_stack(columns))


def collect_snapshots(problem: ProblemSpec, basis: ModalBasis, grid: Grid1D, samples: Sequence[float]) -> SnapshotSet:
    return asyncio.run(collect_snapshots_async(problem, basis, grid, samples))


def centered_matrix(S: DenseMatrix) -> Tuple[DenseVector, DenseMatrix]:
    """Column mean and S minus the mean; rows constant across snapshots are exactly zero."""
    mean = S.mean(axis=1)
    V = S - mean[:, None]
    V[np.ptp(S, axis=1) == 0.0, :] = 0.0
    return mean, V


def snapshot_svd(V: DenseMatrix, refine: bool = True) -> Tuple[DenseVector, DenseMatrix, DenseMatrix]:
    """Thin SVD of V through the P x P Gram matrix.

    Returns (sigma, Phi, Psi) where Phi holds the left singular vectors with
    sigma_i >= DROP_TOL * sigma_1 and Psi the matching right ones; sigma has
    length min(rows, P).
    """
    rows, cols = V.shape
    lam, psi = sym_eigen_descending(V.T @ V)
    if refine:
        W, R = one_sided_jacobi(V @ psi)
        psi = psi @ R
        sigma = np.linalg.norm(W, axis=0)
        order = np.argsort(-sigma, kind="stable")
        sigma, W, psi = sigma[order], W[:, order], psi[:, order]
    else:
        sigma = np.sqrt(np.clip(lam, 0.0, None))
        W = V @ psi
    sigma = sigma[: min(rows, cols)]
    top = float(sigma[0]) if sigma.size else 0.0
    keep = int(np.sum(sigma >= DROP_TOL * top)) if top > 0.0 else 0
    phi = W[:, :keep] / sigma[:keep]
    return sigma, phi, psi[:, :keep]


def build_pod_basis(
    snapshots: SnapshotSet,
    eps: float,
    reading: str = "retained",
    append_mean: bool = False,
    refine: bool = True,
    lift: Optional[DenseVector] = None,
) -> PODBasis:
    mean, V = centered_matrix(snapshots.S)
    sigma, phi, psi = snapshot_svd(V, refine=refine)
    diagnostics: List[str] = []
    if phi.shape[1] == 0:
        if float(np.linalg.norm(mean)) == 0.0:
            raise DegenerateModeError("all snapshots are zero; no basis can be formed")
        direction = mean if lift is None else mean - lift
        if float(np.linalg.norm(direction)) == 0.0:
            direction = mean
        message = "centered snapshot matrix has rank 0; basis falls back to the normalized mean"
        logger.warning(message)
        diagnostics.append(message)
        phi = (direction / np.linalg.norm(direction))[:, None]
        psi = np.zeros((V.shape[1], 1))
        level = 1
    else:
        level = pod_truncate(sigma, eps, reading)
        if level > phi.shape[1]:
            message = f"truncation asks for {level} vectors but only {phi.shape[1]} are above the drop tolerance"
            logger.warning(message)
            diagnostics.append(message)
            level = phi.shape[1]
    return PODBasis(
        mean=mean,
        vectors=phi,
        sigma=sigma,
        right=psi,
        l=level,
        eps=eps,
        reading=reading,
        append_mean=append_mean,
        lift=lift,
        diagnostics=tuple(diagnostics),
    )


def hipod_offline(
    problem: ProblemSpec,
    basis: ModalBasis,
    grid: Grid1D,
    samples: Sequence[float],
    eps: float,
    reading: str = "retained",
    append_mean: bool = False,
    refine: bool = True,
) -> Tuple[SnapshotSet, PODBasis]:
    """Snapshot collection plus POD basis extraction.

    Raises:
        InvalidArgumentError: If the problem is not parametric or fewer than two samples are given
        OutOfRangeError: If a sample lies outside the parameter interval
    """
    if not isinstance(problem.mu, MuInterval):
        raise InvalidArgumentError("HiPOD needs a parametric diffusivity interval")
    if len(samples) < 2:
        raise InvalidArgumentError(f"HiPOD needs at least two samples, got {len(samples)}")
    bad = [mu for mu in samples if not problem.mu.contains(mu)]
    if bad:
        raise OutOfRangeError(f"samples outside [{problem.mu.mu_min}, {problem.mu.mu_max}]: {bad[:5]}")

    start = time.perf_counter()
    snapshots = collect_snapshots(problem, basis, grid, samples)
    lift = himod_parts(problem, basis, grid).lift
    pod = build_pod_basis(snapshots, eps, reading, append_mean, refine, lift=lift)
    logger.info(
        f"HiPOD offline: {len(samples)} snapshots of size {snapshots.S.shape[0]}, "
        f"{pod.vectors.shape[1]} singular vectors, l={pod.l} ({reading}, eps={eps:g}) "
        f"in {time.perf_counter() - start:.3f}s"
    )
    return snapshots, pod


@dataclass(frozen=True, eq=False)
class AffineProjection:
    """Projected mu-affine blocks around an offset u0.

    A(mu) = mu P_D + P_V and f(mu) = loads - mu g_D - g_V, where g_* are the
    projected operators applied to u0; the solution is u0 + Phi c.
    """

    phi: DenseMatrix
    offset: DenseVector
    P_D: DenseMatrix
    P_V: DenseMatrix
    g_D: DenseVector
    g_V: DenseVector
    loads: Tuple[Tuple[DenseVector, Optional[ScalarFunction1D]], ...] = field(default=())

    def solve(self, mu: float) -> DenseVector:
        A = mu * self.P_D + self.P_V
        rhs = -mu * self.g_D - self.g_V
        for vector, fmu in self.loads:
            rhs = rhs + (vector if fmu is None else float(fmu(mu)) * vector)
        return self.offset + self.phi @ solve_dense(A, rhs)


def project_affine(parts: HiModParts, pod: PODBasis, l: Optional[int] = None) -> AffineProjection:
    phi = pod.basis(l)
    offset = pod.offset
    D, V = parts.diffusion, parts.advection
    return AffineProjection(
        phi=phi,
        offset=offset,
        P_D=phi.T @ D @ phi,
        P_V=phi.T @ V @ phi,
        g_D=phi.T @ (D @ offset),
        g_V=phi.T @ (V @ offset),
        loads=tuple((phi.T @ vector, fmu) for vector, fmu in parts.loads),
    )


def _check_mu(problem: ProblemSpec, mu_star: float) -> None:
    if not isinstance(problem.mu, MuInterval):
        raise InvalidArgumentError("HiPOD online needs the parametric problem")
    if not problem.mu.contains(mu_star):
        raise OutOfRangeError(f"mu={mu_star} outside [{problem.mu.mu_min}, {problem.mu.mu_max}]")


def hipod_online(
    problem: ProblemSpec,
    basis: ModalBasis,
    grid: Grid1D,
    pod: PODBasis,
    mu_star: float,
    mode: str = "affine",
    l: Optional[int] = None,
    projection: Optional[AffineProjection] = None,
) -> HiModSolution:
    """Order-l Galerkin solve in offset + span(Phi) at mu_star, returned as a HiMod solution.

    literal: reassemble the HiMod system at mu_star and project it.
    affine: combine projected blocks; pass `projection` to reuse precomputed ones.
    """
    _check_mu(problem, mu_star)
    fiber = (problem.domain.y0, problem.domain.y1)
    if mode == "literal":
        phi = pod.basis(l)
        A, f = himod_assemble(problem.at_mu(mu_star), basis, grid)
        offset = pod.offset
        coeffs = solve_dense(phi.T @ A @ phi, phi.T @ (f - A @ offset))
        return HiModSolution.from_vector(offset + phi @ coeffs, grid, basis, fiber)
    if mode != "affine":
        raise InvalidArgumentError(f"unknown online mode '{mode}'")
    if projection is None:
        projection = project_affine(himod_parts(problem, basis, grid), pod, l)
    return HiModSolution.from_vector(projection.solve(mu_star), grid, basis, fiber)


class SpeedupRecord(BaseModel):
    trials: int
    repetitions: int
    himod_seconds: float
    hipod_affine_seconds: float
    hipod_literal_seconds: float
    speedup: float
    speedup_literal: float


def hipod_speedup_report(
    problem: ProblemSpec,
    basis: ModalBasis,
    grid: Grid1D,
    pod: PODBasis,
    trials: Sequence[float],
    repetitions: int = 5,
    clock: Callable[[], float] = time.perf_counter,
    l: Optional[int] = None,
) -> SpeedupRecord:
    """Median-of-repetitions wall time per query for HiMod versus HiPOD online.

    The affine projection is built once up front and excluded from the timing.
    """
    if not trials:
        raise InvalidArgumentError("speedup report needs at least one trial mu")
    for mu in trials:
        _check_mu(problem, mu)
    projection = project_affine(himod_parts(problem, basis, grid), pod, l)

    def timed(run: Callable[[float], object]) -> float:
        per_rep = []
        for _ in range(max(repetitions, 1)):
            start = clock()
            for mu in trials:
                run(mu)
            per_rep.append((clock() - start) / len(trials))
        return statistics.median(per_rep)

    full = timed(lambda mu: himod_solve(problem.at_mu(mu), basis, grid))
    affine = timed(lambda mu: projection.solve(mu))
    literal = timed(lambda mu: hipod_online(problem, basis, grid, pod, mu, mode="literal", l=l))

    def ratio(a: float, b: float) -> float:
        return a / b if b > 0.0 else math.inf

    record = SpeedupRecord(
        trials=len(trials),
        repetitions=max(repetitions, 1),
        himod_seconds=full,
        hipod_affine_seconds=affine,
        hipod_literal_seconds=literal,
        speedup=ratio(full, affine),
        speedup_literal=ratio(full, literal),
    )
    logger.info(f"HiPOD speedup: affine x{record.speedup:.1f}, literal x{record.speedup_literal:.1f}")
    return record
