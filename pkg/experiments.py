"""
Experiment Runners

Each runner takes an ExperimentConfig (problem INI plus [solver] settings),
runs its solver stages, writes CSV/VTK artifacts into the output directory and
finishes with an atomically written manifest.json listing every produced
file, the per-stage wall times and the headline metrics.

Studies:
    fig1-compare   HiMod and PGD against a fine FE reference (advection test)
    table1-sweep   PGD mode counts and ADS iterations over a tolerance grid
    fig2-param     parametric PGD evaluated at several mu against FE
    fig3-hipod     HiPOD basis size, error table and online speedup
    custom         single-solver commands (solve-fe, solve-himod, ...)
"""

import asyncio
import logging
import os
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from errors import ConfigError, NonConvergenceError, StageFailure, VarsepError
from fe_core import Field2D, Grid1D, Grid2D, fe2d_solve, relative_l2_error
from himod import HiModSolution, ModalBasis, himod_evaluate, himod_parts, himod_relative_l2, himod_solve
from hipod import (
    collect_snapshots_async,
    hipod_offline,
    hipod_online,
    hipod_speedup_report,
    pod_truncate,
    project_affine,
    uniform_samples,
)
from pgd import ADSReport, pgd_evaluate, pgd_solve
from pgd_param import ParamGrid, pgd_param_evaluate, pgd_param_solve
from problem_model import IniDocument, MuInterval, ProblemSpec, problem_from_document, render_problem, validate_problem
from result_writers import (
    atomic_write_text,
    read_pod_csv,
    write_ads_report_csv,
    write_field_csv,
    write_field_vtk,
    write_himod_csv,
    write_pgd_csv,
    write_pgd_param_csv,
    write_pod_csv,
    write_table_csv,
)

logger = logging.getLogger(__name__)

VERSION = "1.0.0"
DEFAULT_SEED = 20190001

EXPERIMENTS = ("fig1-compare", "table1-sweep", "fig2-param", "fig3-hipod", "custom")

# solver compatibility each command needs from the problem
REQUIRED_SOLVERS: Dict[str, Tuple[str, ...]] = {
    "fig1": ("himod", "pgd"),
    "table1": ("pgd",),
    "fig2": ("pgd-param",),
    "fig3": ("hipod",),
    "solve-fe": ("fe",),
    "solve-himod": ("himod",),
    "solve-pgd": ("pgd",),
    "solve-pgd-param": ("pgd-param",),
    "hipod-offline": ("hipod",),
    "hipod-online": ("hipod",),
}

# constant-mu solvers; a parametric problem is frozen at --mu (or [solver] mu)
FROZEN_MU_COMMANDS = ("solve-fe", "solve-himod", "solve-pgd")


def debug_dump_enabled() -> bool:
    return os.getenv("VARSEP_DEBUG_DUMP", "false").lower() == "true"


class SolverSettings(BaseModel):
    """Keys accepted in the [solver] section; defaults reproduce the desk-scale studies."""

    model_config = ConfigDict(extra="forbid")

    ref_nx: int = 625
    ref_ny: int = 125
    full_ref_nx: int = 2500
    full_ref_ny: int = 500

    himod_m: int = 9
    himod_elems: int = 285

    pgd_x_elems: int = 285
    pgd_y_elems: int = 20
    pgd_modes: Optional[int] = 6
    tol_e: float = 8e-3
    tol_fp: float = 1e-2
    max_fp: int = 50
    max_modes: int = 30
    sweep_tol_e: List[float] = [2e-2, 8e-3]
    sweep_tol_fp: List[float] = [1e-1, 1e-2, 1e-3]

    param_modes: int = 2
    param_x_elems: int = 150
    param_y_elems: int = 50
    param_mu_elems: int = 500
    param_mu_values: List[float] = [1.0, 2.5]
    param_check_mu: float = 5.0
    param_ref_nx: int = 300
    param_ref_ny: int = 100

    hipod_m: int = 15
    hipod_elems: int = 50
    hipod_samples: int = 100
    hipod_eps: float = 2.5e-15
    hipod_levels: List[int] = [1, 4, 6, 8]
    hipod_mu_stars: List[float] = [1.0, 2.5]
    hipod_field_nx: int = 300
    hipod_field_ny: int = 100
    hipod_random_draws: int = 30
    truncation: str = "retained"
    append_mean: bool = False
    speedup_repetitions: int = 5
    expected_l: Optional[int] = None

    mu: Optional[float] = None

    @field_validator(
        "sweep_tol_e", "sweep_tol_fp", "param_mu_values", "hipod_levels", "hipod_mu_stars", mode="before"
    )
    @classmethod
    def _split_list(cls, value):
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value

    @field_validator("pgd_modes", "mu", "expected_l", mode="before")
    @classmethod
    def _none_word(cls, value):
        if isinstance(value, str) and value.strip().lower() in ("", "none"):
            return None
        return value

    @field_validator("truncation")
    @classmethod
    def _known_reading(cls, value: str) -> str:
        if value not in ("retained", "literal"):
            raise ValueError("truncation must be 'retained' or 'literal'")
        return value


class ExperimentConfig(BaseModel):
    name: str
    command: str
    config_path: str
    output_dir: str
    problem: ProblemSpec
    settings: SolverSettings = SolverSettings()
    seed: int = DEFAULT_SEED
    full_reference: bool = False

    @field_validator("name")
    @classmethod
    def _known_experiment(cls, value: str) -> str:
        if value not in EXPERIMENTS:
            raise ValueError(f"unknown experiment '{value}'")
        return value


class RunManifest(BaseModel):
    experiment: str
    command: str
    code_version: str = VERSION
    seed: int
    config: Dict[str, object] = {}
    stages: Dict[str, float] = {}
    metrics: Dict[str, float] = {}
    files: List[str] = []
    failed_stage: Optional[str] = None


class ExperimentResult(BaseModel):
    files: List[Path] = []
    metrics: Dict[str, float] = {}
    manifest: Optional[Path] = None


def load_experiment_config(
    command: str,
    config_path: str,
    output_dir: Optional[str] = None,
    seed: Optional[int] = None,
    full_reference: bool = False,
    mu: Optional[float] = None,
) -> ExperimentConfig:
    """Parse a problem INI with an optional [solver] section into an ExperimentConfig.

    Raises:
        ConfigError: On a missing file, unknown sections or keys, invalid
            values, or a problem the command's solvers cannot handle
    """
    path = Path(config_path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    doc = IniDocument(path.read_text(encoding="utf-8"), str(path))
    doc.check_sections(("domain", "coefficients", "forcing", "bc", "solver"))
    problem = problem_from_document(doc)

    raw = dict(doc.parser["solver"]) if doc.parser.has_section("solver") else {}
    try:
        settings = SolverSettings(**raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        key = str(first["loc"][0]) if first["loc"] else None
        raise ConfigError(f"{path}: [solver] {key}: {first['msg']}", doc.line("solver", key)) from exc

    frozen_mu = mu if mu is not None else settings.mu
    if command in FROZEN_MU_COMMANDS and problem.is_parametric and frozen_mu is not None:
        try:
            problem = problem.at_mu(frozen_mu)
        except VarsepError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    for solver in REQUIRED_SOLVERS.get(command, ()):
        issues = validate_problem(problem, solver)
        if issues:
            raise ConfigError(f"{path}: problem not admissible for {solver}: {'; '.join(issues)}")

    name = {"fig1": "fig1-compare", "table1": "table1-sweep", "fig2": "fig2-param", "fig3": "fig3-hipod"}.get(
        command, "custom"
    )
    return ExperimentConfig(
        name=name,
        command=command,
        config_path=str(path),
        output_dir=output_dir or os.getenv("VARSEP_OUTPUT_DIR", "results"),
        problem=problem,
        settings=settings,
        seed=seed if seed is not None else int(os.getenv("VARSEP_SEED", str(DEFAULT_SEED))),
        full_reference=full_reference,
    )


def validate_configuration(cfg: ExperimentConfig) -> List[str]:
    """Log and return warnings for settings that make a study less meaningful."""
    s = cfg.settings
    warnings: List[str] = []
    ref_nx = s.full_ref_nx if cfg.full_reference else s.ref_nx
    if cfg.command == "fig1" and ref_nx < 2 * max(s.himod_elems, s.pgd_x_elems):
        warnings.append(
            f"reference has {ref_nx} x-elements, less than twice the reduced discretization "
            f"({max(s.himod_elems, s.pgd_x_elems)})"
        )
    if cfg.command == "fig3" and max(s.hipod_levels) > s.hipod_samples - 1:
        warnings.append(f"largest POD level {max(s.hipod_levels)} exceeds the centered snapshot rank bound")
    if s.tol_fp > s.tol_e * 10:
        warnings.append(f"tol_fp={s.tol_fp:g} is loose relative to tol_e={s.tol_e:g}")
    for message in warnings:
        logger.warning(message)
    return warnings


class ExperimentRunner:
    """Stage bookkeeping shared by every experiment: timings, files, metrics, manifest."""

    def __init__(self, cfg: ExperimentConfig) -> None:
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(
            experiment=cfg.name,
            command=cfg.command,
            seed=cfg.seed,
            config={
                "config_path": cfg.config_path,
                "full_reference": cfg.full_reference,
                "settings": cfg.settings.model_dump(),
                "problem": render_problem(cfg.problem),
            },
        )
        self.files: List[Path] = []

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        logger.info(f"Stage '{name}' started")
        start = time.perf_counter()
        try:
            yield
        except ConfigError:
            self._record_time(name, start)
            raise
        except Exception as exc:
            self._record_time(name, start)
            self.manifest.failed_stage = name
            self._write_manifest()
            if isinstance(exc, StageFailure):
                raise
            raise StageFailure(name, exc) from exc
        elapsed = self._record_time(name, start)
        logger.info(f"Stage '{name}' finished in {elapsed:.3f}s")

    def _record_time(self, name: str, start: float) -> float:
        elapsed = time.perf_counter() - start
        self.manifest.stages[name] = round(self.manifest.stages.get(name, 0.0) + elapsed, 6)
        return elapsed

    def output(self, filename: str) -> Path:
        path = self.out / filename
        if path not in self.files:
            self.files.append(path)
            self.manifest.files.append(filename)
        return path

    def metric(self, key: str, value: float) -> None:
        self.manifest.metrics[key] = float(value)

    def debug_dump(self, stage: str, lines: Sequence[str]) -> None:
        if debug_dump_enabled():
            atomic_write_text(self.output(f"debug_{stage}.txt"), "\n".join(lines) + "\n")

    def _write_manifest(self) -> Path:
        return atomic_write_text(self.out / "manifest.json", self.manifest.model_dump_json(indent=2) + "\n")

    def finish(self) -> ExperimentResult:
        manifest = self._write_manifest()
        logger.info(f"{self.cfg.name}: wrote {len(self.files)} files to {self.out}")
        return ExperimentResult(files=list(self.files), metrics=dict(self.manifest.metrics), manifest=manifest)


def _write_sigma(runner: ExperimentRunner, sigma: Sequence[float]) -> None:
    write_table_csv(
        runner.output("pod_sigma.csv"),
        ("index", "sigma", "sigma_squared"),
        [(i + 1, v, v * v) for i, v in enumerate(sigma)],
    )


def _x_grid(problem: ProblemSpec, n: int) -> Grid1D:
    return Grid1D(problem.domain.x0, problem.domain.x1, n)


def _y_grid(problem: ProblemSpec, n: int) -> Grid1D:
    return Grid1D(problem.domain.y0, problem.domain.y1, n)


def _mu_label(mu: float) -> str:
    return format(mu, "g")


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------

def run_fig1_compare(cfg: ExperimentConfig, mu: Optional[float] = None) -> ExperimentResult:
    """HiMod and PGD against an FE reference on the advection-dominated test."""
    runner = ExperimentRunner(cfg)
    s, p = cfg.settings, cfg.problem
    nx, ny = (s.full_ref_nx, s.full_ref_ny) if cfg.full_reference else (s.ref_nx, s.ref_ny)
    ref_grid = Grid2D.for_problem(p, nx, ny)

    with runner.stage("reference"):
        reference = fe2d_solve(p, ref_grid)
    with runner.stage("himod"):
        hsol = himod_solve(p, ModalBasis(s.himod_m), _x_grid(p, s.himod_elems))
        hfield = himod_evaluate(hsol, ref_grid)
    with runner.stage("pgd"):
        psol = pgd_solve(
            p,
            _x_grid(p, s.pgd_x_elems),
            _y_grid(p, s.pgd_y_elems),
            tol_e=s.tol_e,
            tol_fp=s.tol_fp,
            max_modes=s.max_modes,
            n_modes=s.pgd_modes,
            max_fp=s.max_fp,
        )
        pfield = pgd_evaluate(psol, ref_grid)
    with runner.stage("errors"):
        errors = [("himod", relative_l2_error(hfield, reference)), ("pgd", relative_l2_error(pfield, reference))]
    for solver, value in errors:
        runner.metric(f"{solver}_error", value)
        logger.info(f"Relative L2 error of {solver} vs reference: {value:.3e}")
    runner.metric("pgd_modes", psol.m)

    with runner.stage("write"):
        write_field_vtk(runner.output("reference.vtk"), reference, "FE reference")
        write_field_vtk(runner.output("himod.vtk"), hfield, f"HiMod m={s.himod_m}")
        write_field_vtk(runner.output("pgd.vtk"), pfield, f"PGD m={psol.m}")
        write_table_csv(runner.output("errors.csv"), ("solver", "relative_l2_error"), errors)
        write_himod_csv(runner.output("himod.csv"), hsol)
        write_pgd_csv(runner.output("pgd.csv"), psol)
        write_ads_report_csv(runner.output("ads_report.csv"), [psol.report])
    runner.debug_dump("pgd", [f"mode {r.mode_index}: {r.increments}" for r in psol.report.enrichments])
    return runner.finish()


class SweepCell(BaseModel):
    tol_e: float
    tol_fp: float
    m: Optional[int] = None
    iterations: List[int] = []
    status: str = "ok"
    seconds: float = 0.0
    increments: List[List[float]] = Field(default_factory=list)
    report: Optional[ADSReport] = None


async def _sweep_async(cfg: ExperimentConfig) -> List[SweepCell]:
    s, p = cfg.settings, cfg.problem
    x_grid, y_grid = _x_grid(p, s.pgd_x_elems), _y_grid(p, s.pgd_y_elems)

    def run_cell(tol_e: float, tol_fp: float) -> SweepCell:
        start = time.perf_counter()
        cell = SweepCell(tol_e=tol_e, tol_fp=tol_fp)
        try:
            sol = pgd_solve(p, x_grid, y_grid, tol_e=tol_e, tol_fp=tol_fp, max_modes=s.max_modes, max_fp=s.max_fp)
            cell.m = sol.m
            cell.iterations = sol.report.iterations
            cell.increments = [rec.increments for rec in sol.report.enrichments]
            cell.report = sol.report
        except NonConvergenceError as exc:
            logger.warning(f"Sweep cell tol_e={tol_e:g}, tol_fp={tol_fp:g} did not converge: {exc}")
            cell.status = f"nonconverged after {exc.iterations} iterations"
        cell.seconds = time.perf_counter() - start
        return cell

    cells = [(tol_e, tol_fp) for tol_e in s.sweep_tol_e for tol_fp in s.sweep_tol_fp]
    return list(await asyncio.gather(*(asyncio.to_thread(run_cell, e, f) for e, f in cells)))


def run_table1_sweep(cfg: ExperimentConfig, mu: Optional[float] = None) -> ExperimentResult:
    """PGD over tol_e x tol_fp; rows in declared order, timings kept in a separate file."""
    runner = ExperimentRunner(cfg)
    with runner.stage("sweep"):
        cells = asyncio.run(_sweep_async(cfg))
    with runner.stage("write"):
        write_table_csv(
            runner.output("table1.csv"),
            ("tol_e", "tol_fp", "m", "fp_iterations", "status"),
            [
                (c.tol_e, c.tol_fp, "" if c.m is None else c.m, ";".join(str(i) for i in c.iterations), c.status)
                for c in cells
            ],
        )
        write_table_csv(
            runner.output("table1_cpu.csv"), ("tol_e", "tol_fp", "seconds"), [(c.tol_e, c.tol_fp, c.seconds) for c in cells]
        )
        write_ads_report_csv(runner.output("ads_report.csv"), [c.report for c in cells if c.report is not None])
    for c in cells:
        if c.m is not None:
            runner.metric(f"m[tol_e={c.tol_e:g},tol_fp={c.tol_fp:g}]", c.m)
    runner.debug_dump(
        "sweep", [f"tol_e={c.tol_e:g} tol_fp={c.tol_fp:g} increments={c.increments}" for c in cells]
    )
    return runner.finish()


def run_fig2_param(cfg: ExperimentConfig, mu: Optional[float] = None) -> ExperimentResult:
    """Parametric PGD evaluated at several mu against frozen-mu FE references."""
    runner = ExperimentRunner(cfg)
    s, p = cfg.settings, cfg.problem
    ref_grid = Grid2D.for_problem(p, s.param_ref_nx, s.param_ref_ny)

    with runner.stage("pgd-param"):
        sol = pgd_param_solve(
            p,
            _x_grid(p, s.param_x_elems),
            _y_grid(p, s.param_y_elems),
            ParamGrid.for_problem(p, s.param_mu_elems),
            tol_e=s.tol_e,
            tol_fp=s.tol_fp,
            max_modes=s.max_modes,
            n_modes=s.param_modes,
            max_fp=s.max_fp,
        )

    mus = list(s.param_mu_values)
    if s.param_check_mu not in mus:
        mus.append(s.param_check_mu)
    if mu is not None and mu not in mus:
        mus.append(mu)
    rows = []
    for value in mus:
        with runner.stage(f"evaluate mu={_mu_label(value)}"):
            reduced = pgd_param_evaluate(sol, ref_grid, value)
            reference = fe2d_solve(p.at_mu(value), ref_grid)
            error = relative_l2_error(reduced, reference)
        rows.append((value, error))
        runner.metric(f"error[mu={_mu_label(value)}]", error)
        logger.info(f"Parametric PGD relative L2 error at mu={value:g}: {error:.3e}")
        if value in s.param_mu_values:
            with runner.stage("write fields"):
                write_field_vtk(runner.output(f"pgd_mu{_mu_label(value)}.vtk"), reduced, f"parametric PGD mu={value:g}")
                write_field_vtk(runner.output(f"fe_mu{_mu_label(value)}.vtk"), reference, f"FE reference mu={value:g}")

    with runner.stage("write"):
        write_table_csv(runner.output("errors.csv"), ("mu", "relative_l2_error"), rows)
        write_pgd_param_csv(runner.output("pgd_param.csv"), sol)
        write_ads_report_csv(runner.output("ads_report.csv"), [sol.report])
    return runner.finish()


def run_fig3_hipod(cfg: ExperimentConfig, mu: Optional[float] = None) -> ExperimentResult:
    """HiPOD offline basis, error table over l and mu*, contour fields and the online speedup.

    The error table uses the explicit hipod_levels, so it is written before the
    expected_l check; a truncation mismatch still leaves pod_sigma.csv and
    fig3_table.csv behind.
    """
    runner = ExperimentRunner(cfg)
    s, p = cfg.settings, cfg.problem
    basis = ModalBasis(s.hipod_m)
    grid = _x_grid(p, s.hipod_elems)
    interval: MuInterval = p.mu

    with runner.stage("offline"):
        samples = uniform_samples(interval, s.hipod_samples)
        _, pod = hipod_offline(p, basis, grid, samples, s.hipod_eps, s.truncation, s.append_mean)
    alternatives = {reading: pod_truncate(pod.sigma, s.hipod_eps, reading) for reading in ("retained", "literal")}
    runner.metric("l", pod.l)
    for reading, level in alternatives.items():
        runner.metric(f"l_{reading}", level)
    logger.info(f"POD truncation at eps={s.hipod_eps:g}: l={pod.l} ({s.truncation}); readings {alternatives}")
    _write_sigma(runner, pod.sigma)

    rng = np.random.default_rng(cfg.seed)
    random_mus = [float(v) for v in rng.uniform(interval.mu_min, interval.mu_max, s.hipod_random_draws)]
    queries = list(s.hipod_mu_stars) + random_mus

    with runner.stage("references"):
        references = asyncio.run(collect_snapshots_async(p, basis, grid, queries))
    fiber = (p.domain.y0, p.domain.y1)
    ref_solutions = [HiModSolution.from_vector(references.S[:, i], grid, basis, fiber) for i in range(len(queries))]

    rows = []
    first_level: Dict[int, HiModSolution] = {}
    with runner.stage("online"):
        parts = himod_parts(p, basis, grid)
        for level in s.hipod_levels:
            projection = project_affine(parts, pod, level)
            errors = []
            for i, (mu_star, ref) in enumerate(zip(queries, ref_solutions)):
                approx = hipod_online(p, basis, grid, pod, mu_star, mode="affine", projection=projection)
                errors.append(himod_relative_l2(approx, ref))
                if level == s.hipod_levels[0] and i < len(s.hipod_mu_stars):
                    first_level[i] = approx
            for mu_star, err in zip(s.hipod_mu_stars, errors):
                rows.append((level, _mu_label(mu_star), err))
                runner.metric(f"error[l={level},mu={_mu_label(mu_star)}]", err)
            random_error = float(np.mean(errors[len(s.hipod_mu_stars):])) if random_mus else float("nan")
            rows.append((level, "random", random_error))
            runner.metric(f"error[l={level},random]", random_error)
    write_table_csv(runner.output("fig3_table.csv"), ("l", "mu_star_or_random", "relative_error"), rows)

    if s.expected_l is not None and s.expected_l not in alternatives.values():
        squares = ", ".join(f"{v * v:.6e}" for v in pod.sigma)
        with runner.stage("truncation"):
            raise VarsepError(
                f"no truncation reading gives l={s.expected_l} at eps={s.hipod_eps:g} "
                f"(readings {alternatives}); sigma^2 = [{squares}]"
            )

    with runner.stage("fields"):
        field_grid = Grid2D.for_problem(p, s.hipod_field_nx, s.hipod_field_ny)
        for i, (mu_star, ref) in enumerate(zip(s.hipod_mu_stars, ref_solutions)):
            label = _mu_label(mu_star)
            write_field_vtk(runner.output(f"himod_mu{label}.vtk"), himod_evaluate(ref, field_grid), f"HiMod mu={label}")
            write_field_vtk(
                runner.output(f"hipod_l{s.hipod_levels[0]}_mu{label}.vtk"),
                himod_evaluate(first_level[i], field_grid),
                f"HiPOD l={s.hipod_levels[0]} mu={label}",
            )

    with runner.stage("speedup"):
        record = hipod_speedup_report(
            p, basis, grid, pod, random_mus or list(s.hipod_mu_stars), repetitions=s.speedup_repetitions
        )
    runner.metric("speedup", record.speedup)
    runner.metric("speedup_literal", record.speedup_literal)

    with runner.stage("write"):
        write_pod_csv(runner.output("pod_basis.csv"), pod)
        record_fields = list(type(record).model_fields)
        write_table_csv(runner.output("speedup.csv"), record_fields, [[getattr(record, f) for f in record_fields]])
    runner.debug_dump("offline", [f"sigma^2[{i + 1}] = {v * v:.15g}" for i, v in enumerate(pod.sigma)])
    return runner.finish()


# ---------------------------------------------------------------------------
# Single-solver commands
# ---------------------------------------------------------------------------

def _query_mus(cfg: ExperimentConfig, mu: Optional[float], fallback: Sequence[float]) -> List[float]:
    if mu is not None:
        return [mu]
    if cfg.settings.mu is not None:
        return [cfg.settings.mu]
    return list(fallback)


def _write_field(runner: ExperimentRunner, stem: str, field: Field2D, title: str) -> None:
    write_field_vtk(runner.output(f"{stem}.vtk"), field, title)
    write_field_csv(runner.output(f"{stem}_field.csv"), field)


def run_solve_fe(cfg: ExperimentConfig, mu: Optional[float] = None) -> ExperimentResult:
    runner = ExperimentRunner(cfg)
    s, p = cfg.settings, cfg.problem
    nx, ny = (s.full_ref_nx, s.full_ref_ny) if cfg.full_reference else (s.ref_nx, s.ref_ny)
    with runner.stage("fe"):
        field = fe2d_solve(p, Grid2D.for_problem(p, nx, ny))
    runner.metric("l2_norm", field.l2_norm())
    with runner.stage("write"):
        _write_field(runner, "fe", field, f"FE {nx}x{ny}")
    return runner.finish()


def run_solve_himod(cfg: ExperimentConfig, mu: Optional[float] = None) -> ExperimentResult:
    runner = ExperimentRunner(cfg)
    s, p = cfg.settings, cfg.problem
    with runner.stage("himod"):
        sol = himod_solve(p, ModalBasis(s.himod_m), _x_grid(p, s.himod_elems))
        field = himod_evaluate(sol, Grid2D.for_problem(p, s.himod_elems, 4 * s.himod_m))
    runner.metric("l2_norm", field.l2_norm())
    with runner.stage("write"):
        write_himod_csv(runner.output("himod.csv"), sol)
        _write_field(runner, "himod", field, f"HiMod m={s.himod_m}")
    return runner.finish()


def run_solve_pgd(cfg: ExperimentConfig, mu: Optional[float] = None) -> ExperimentResult:
    runner = ExperimentRunner(cfg)
    s, p = cfg.settings, cfg.problem
    x_grid, y_grid = _x_grid(p, s.pgd_x_elems), _y_grid(p, s.pgd_y_elems)
    with runner.stage("pgd"):
        sol = pgd_solve(
            p, x_grid, y_grid, s.tol_e, s.tol_fp, s.max_modes, n_modes=s.pgd_modes, max_fp=s.max_fp
        )
        field = pgd_evaluate(sol, Grid2D(x_grid=x_grid, y_grid=y_grid))
    runner.metric("modes", sol.m)
    with runner.stage("write"):
        write_pgd_csv(runner.output("pgd.csv"), sol)
        write_ads_report_csv(runner.output("ads_report.csv"), [sol.report])
        _write_field(runner, "pgd", field, f"PGD m={sol.m}")
    return runner.finish()


def run_solve_pgd_param(cfg: ExperimentConfig, mu: Optional[float] = None) -> ExperimentResult:
    runner = ExperimentRunner(cfg)
    s, p = cfg.settings, cfg.problem
    x_grid, y_grid = _x_grid(p, s.param_x_elems), _y_grid(p, s.param_y_elems)
    with runner.stage("pgd-param"):
        sol = pgd_param_solve(
            p,
            x_grid,
            y_grid,
            ParamGrid.for_problem(p, s.param_mu_elems),
            tol_e=s.tol_e,
            tol_fp=s.tol_fp,
            max_modes=s.max_modes,
            n_modes=s.param_modes,
            max_fp=s.max_fp,
        )
    runner.metric("modes", sol.m)
    with runner.stage("write"):
        write_pgd_param_csv(runner.output("pgd_param.csv"), sol)
        write_ads_report_csv(runner.output("ads_report.csv"), [sol.report])
    for value in _query_mus(cfg, mu, s.param_mu_values):
        with runner.stage(f"evaluate mu={_mu_label(value)}"):
            field = pgd_param_evaluate(sol, Grid2D(x_grid=x_grid, y_grid=y_grid), value)
            _write_field(runner, f"pgd_param_mu{_mu_label(value)}", field, f"parametric PGD mu={value:g}")
    return runner.finish()


def run_hipod_offline(cfg: ExperimentConfig, mu: Optional[float] = None) -> ExperimentResult:
    runner = ExperimentRunner(cfg)
    s, p = cfg.settings, cfg.problem
    with runner.stage("offline"):
        _, pod = hipod_offline(
            p,
            ModalBasis(s.hipod_m),
            _x_grid(p, s.hipod_elems),
            uniform_samples(p.mu, s.hipod_samples),
            s.hipod_eps,
            s.truncation,
            s.append_mean,
        )
    runner.metric("l", pod.l)
    for message in pod.diagnostics:
        logger.warning(f"HiPOD offline: {message}")
    with runner.stage("write"):
        write_pod_csv(runner.output("pod_basis.csv"), pod)
        _write_sigma(runner, pod.sigma)
    return runner.finish()


def run_hipod_online(cfg: ExperimentConfig, mu: Optional[float] = None) -> ExperimentResult:
    """Online solves from a pod_basis.csv previously written to the same output directory."""
    runner = ExperimentRunner(cfg)
    s, p = cfg.settings, cfg.problem
    basis, grid = ModalBasis(s.hipod_m), _x_grid(p, s.hipod_elems)
    pod = read_pod_csv(runner.out / "pod_basis.csv")
    if pod.vectors.shape[0] != basis.m * grid.n_nodes:
        raise ConfigError(
            f"pod_basis.csv holds vectors of size {pod.vectors.shape[0]}, "
            f"expected {basis.m * grid.n_nodes} for hipod_m={s.hipod_m}, hipod_elems={s.hipod_elems}"
        )
    for value in _query_mus(cfg, mu, s.hipod_mu_stars):
        label = _mu_label(value)
        with runner.stage(f"online mu={label}"):
            sol = hipod_online(p, basis, grid, pod, value)
            field = himod_evaluate(sol, Grid2D.for_problem(p, s.hipod_elems, 4 * s.hipod_m))
        with runner.stage("write"):
            write_himod_csv(runner.output(f"hipod_mu{label}.csv"), sol)
            _write_field(runner, f"hipod_mu{label}", field, f"HiPOD l={pod.l} mu={value:g}")
    return runner.finish()


COMMANDS = {
    "fig1": run_fig1_compare,
    "table1": run_table1_sweep,
    "fig2": run_fig2_param,
    "fig3": run_fig3_hipod,
    "solve-fe": run_solve_fe,
    "solve-himod": run_solve_himod,
    "solve-pgd": run_solve_pgd,
    "solve-pgd-param": run_solve_pgd_param,
    "hipod-offline": run_hipod_offline,
    "hipod-online": run_hipod_online,
}


def run_command(cfg: ExperimentConfig, mu: Optional[float] = None) -> ExperimentResult:
    validate_configuration(cfg)
    if cfg.command in COMMANDS:
        return COMMANDS[cfg.command](cfg, mu)
    raise ConfigError(f"unknown command '{cfg.command}'")
