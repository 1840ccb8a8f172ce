"""
CSV and VTK serializers for solver results.

All CSV files are comma-separated with a header row, LF line endings and
floats printed with 15 significant digits, so identical inputs give
byte-identical files. Files are written to a temporary sibling first and
renamed into place.
"""

import csv
import io
import logging
import os
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from errors import ConfigError
from fe_core import Field2D
from himod import HiModSolution
from hipod import PODBasis
from pgd import ADSReport, PGDSolution
from pgd_param import PGDParamSolution

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".15g")
    return str(value)


def atomic_write_text(path: PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
    os.replace(tmp, path)
    logger.debug(f"Wrote {path}")
    return path


def write_table_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return atomic_write_text(path, buffer.getvalue())


def write_field_csv(path: PathLike, field: Field2D) -> Path:
    xs, ys = field.grid.x_grid.nodes, field.grid.y_grid.nodes
    rows = ((xs[i], ys[j], field.values[i, j]) for i in range(xs.size) for j in range(ys.size))
    return write_table_csv(path, ("x", "y", "value"), rows)


def write_field_vtk(path: PathLike, field: Field2D, title: str = "varsep-mor field") -> Path:
    """Legacy ASCII STRUCTURED_POINTS file with one scalar 'u' per node (x fastest)."""
    gx, gy = field.grid.x_grid, field.grid.y_grid
    nx, ny = field.grid.shape
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx} {ny} 1",
        f"ORIGIN {fmt(gx.a)} {fmt(gy.a)} 0",
        f"SPACING {fmt(gx.h)} {fmt(gy.h)} 1",
        f"POINT_DATA {nx * ny}",
        "SCALARS u double 1",
        "LOOKUP_TABLE default",
    ]
    lines.extend(fmt(v) for v in field.values.T.ravel())
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_himod_csv(path: PathLike, sol: HiModSolution) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["m", "n_h", "x0", "x1", "y0", "y1"])
    writer.writerow([fmt(v) for v in (sol.basis.m, sol.grid.n_nodes, sol.grid.a, sol.grid.b, *sol.fiber)])
    writer.writerow(["k", "l", "value"])
    for k in range(sol.basis.m):
        for l in range(sol.grid.n_nodes):
            writer.writerow([k + 1, l + 1, fmt(sol.coeffs[k, l])])
    return atomic_write_text(path, buffer.getvalue())


def write_pgd_csv(path: PathLike, sol: PGDSolution) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["m", "n_x", "n_y"])
    writer.writerow([sol.m, sol.x_grid.n_nodes, sol.y_grid.n_nodes])
    for pair in sol.modes:
        writer.writerow(["ux"] + [fmt(v) for v in pair.ux])
        writer.writerow(["uy"] + [fmt(v) for v in pair.uy])
    return atomic_write_text(path, buffer.getvalue())


def write_pgd_param_csv(path: PathLike, sol: PGDParamSolution) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["m", "n_x", "n_y", "n_mu", "mu_min", "mu_max"])
    writer.writerow(
        [sol.m, sol.x_grid.n_nodes, sol.y_grid.n_nodes, sol.pgrid.grid.n_nodes, fmt(sol.pgrid.mu_min), fmt(sol.pgrid.mu_max)]
    )
    for triple in sol.modes:
        writer.writerow(["ux"] + [fmt(v) for v in triple.ux])
        writer.writerow(["uy"] + [fmt(v) for v in triple.uy])
        writer.writerow(["umu"] + [fmt(v) for v in triple.umu])
    return atomic_write_text(path, buffer.getvalue())


def ads_report_rows(report: ADSReport) -> List[list]:
    return [
        [report.tol_e, report.tol_fp, rec.mode_index, rec.fp_iterations, rec.final_increment]
        for rec in report.enrichments
    ]


ADS_HEADER = ("tol_e", "tol_fp", "mode_index", "fp_iterations", "final_increment")


def write_ads_report_csv(path: PathLike, reports: Sequence[ADSReport]) -> Path:
    rows = [row for report in reports for row in ads_report_rows(report)]
    return write_table_csv(path, ADS_HEADER, rows)


def write_pod_csv(path: PathLike, pod: PODBasis) -> Path:
    """Rows tagged meta / sigma / mean / lift / phi / psi; read back by read_pod_csv."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["kind", "index", "values"])
    writer.writerow(["meta", 0, pod.l, fmt(pod.eps), pod.reading, fmt(pod.append_mean)])
    writer.writerow(["sigma", 0] + [fmt(v) for v in pod.sigma])
    writer.writerow(["mean", 0] + [fmt(v) for v in pod.mean])
    if pod.lift is not None:
        writer.writerow(["lift", 0] + [fmt(v) for v in pod.lift])
    for i in range(pod.vectors.shape[1]):
        writer.writerow(["phi", i + 1] + [fmt(v) for v in pod.vectors[:, i]])
    for i in range(pod.right.shape[1]):
        writer.writerow(["psi", i + 1] + [fmt(v) for v in pod.right[:, i]])
    return atomic_write_text(path, buffer.getvalue())


def read_pod_csv(path: PathLike) -> PODBasis:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"POD basis file not found: {path}")
    meta = None
    sigma: List[float] = []
    mean: List[float] = []
    lift: Optional[List[float]] = None
    phi: List[List[float]] = []
    psi: List[List[float]] = []
    with open(path, newline="", encoding="utf-8") as handle:
        for lineno, row in enumerate(csv.reader(handle), start=1):
            if lineno == 1 or not row:
                continue
            kind = row[0]
            try:
                if kind == "meta":
                    meta = (int(row[2]), float(row[3]), row[4], row[5] == "1")
                elif kind == "sigma":
                    sigma = [float(v) for v in row[2:]]
                elif kind == "mean":
                    mean = [float(v) for v in row[2:]]
                elif kind == "lift":
                    lift = [float(v) for v in row[2:]]
                elif kind == "phi":
                    phi.append([float(v) for v in row[2:]])
                elif kind == "psi":
                    psi.append([float(v) for v in row[2:]])
                else:
                    raise ConfigError(f"{path}: unknown row kind '{kind}'", lineno)
            except (IndexError, ValueError) as exc:
                raise ConfigError(f"{path}: malformed row: {exc}", lineno) from exc
    if meta is None or not phi:
        raise ConfigError(f"{path}: missing meta or basis rows")
    l, eps, reading, append_mean = meta
    return PODBasis(
        mean=np.asarray(mean),
        vectors=np.asarray(phi).T,
        sigma=np.asarray(sigma),
        right=np.asarray(psi).T if psi else np.zeros((0, len(phi))),
        l=l,
        eps=eps,
        reading=reading,
        append_mean=append_mean,
        lift=None if lift is None else np.asarray(lift),
    )
