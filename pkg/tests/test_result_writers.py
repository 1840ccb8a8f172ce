import numpy as np
import pytest

from errors import ConfigError
from fe_core import Field2D, Grid1D, Grid2D
from hipod import PODBasis
from pgd import ADSReport, EnrichmentRecord
from result_writers import (
    ADS_HEADER,
    fmt,
    read_pod_csv,
    write_ads_report_csv,
    write_field_csv,
    write_field_vtk,
    write_pod_csv,
    write_table_csv,
)


@pytest.fixture
def small_field():
    grid = Grid2D(Grid1D(0.0, 2.0, 2), Grid1D(0.0, 1.0, 1))
    values = np.array([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]])
    return Field2D(grid, values)


def test_fmt():
    assert fmt(True) == "1" and fmt(False) == "0"
    assert fmt(np.int64(7)) == "7"
    assert fmt(0.1) == "0.1"
    assert fmt(1.0 / 3.0) == "0.333333333333333"
    assert fmt("converged") == "converged"


def test_table_uses_lf_and_leaves_no_temp_file(tmp_path):
    path = write_table_csv(tmp_path / "out" / "table.csv", ("a", "b"), [(1, 0.5), (2, 1e-20)])
    raw = path.read_bytes()
    assert raw == b"a,b\n1,0.5\n2,1e-20\n"
    assert [p.name for p in path.parent.iterdir()] == ["table.csv"]


def test_field_csv_rows(tmp_path, small_field):
    lines = write_field_csv(tmp_path / "field.csv", small_field).read_text().splitlines()
    assert lines[0] == "x,y,value"
    assert lines[1] == "0,0,0"
    assert lines[2] == "0,1,1"
    assert lines[-1] == "2,1,5"
    assert len(lines) == 7


def test_vtk_header_and_x_fastest(tmp_path, small_field):
    lines = write_field_vtk(tmp_path / "field.vtk", small_field, title="demo").read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[1] == "demo"
    assert "DIMENSIONS 3 2 1" in lines
    assert "SPACING 1 1 1" in lines
    assert "POINT_DATA 6" in lines
    start = lines.index("LOOKUP_TABLE default") + 1
    assert lines[start:] == ["0", "2", "4", "1", "3", "5"]


def test_ads_report_csv(tmp_path):
    report = ADSReport(
        tol_e=8e-3,
        tol_fp=1e-2,
        enrichments=[
            EnrichmentRecord(mode_index=1, fp_iterations=4, final_increment=5e-3, enrichment_ratio=1.0),
            EnrichmentRecord(mode_index=2, fp_iterations=6, final_increment=2e-3, enrichment_ratio=0.1),
        ],
        stopped_by="fixed_modes",
    )
    lines = write_ads_report_csv(tmp_path / "ads.csv", [report]).read_text().splitlines()
    assert lines[0] == ",".join(ADS_HEADER)
    assert lines[2] == "0.008,0.01,2,6,0.002"


def test_pod_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    vectors, _ = np.linalg.qr(rng.normal(size=(6, 3)))
    pod = PODBasis(
        mean=rng.normal(size=6),
        vectors=vectors,
        sigma=np.array([2.0, 0.5, 1e-9, 0.0]),
        right=rng.normal(size=(4, 3)),
        l=2,
        eps=2.5e-15,
        reading="literal",
        append_mean=True,
    )
    loaded = read_pod_csv(write_pod_csv(tmp_path / "pod_basis.csv", pod))
    assert loaded.l == 2 and loaded.reading == "literal" and loaded.append_mean
    assert loaded.eps == 2.5e-15
    assert np.allclose(loaded.vectors, pod.vectors, rtol=1e-14)
    assert np.allclose(loaded.sigma, pod.sigma, rtol=1e-14)
    assert np.allclose(loaded.right, pod.right, rtol=1e-14)


def test_pod_csv_reports_bad_line(tmp_path):
    path = tmp_path / "pod_basis.csv"
    path.write_text("kind,index,values\nmeta,0,2,1e-10,retained,0\nsigma,0,1.0,abc\n")
    with pytest.raises(ConfigError) as excinfo:
        read_pod_csv(path)
    assert excinfo.value.line == 3


def test_pod_csv_unknown_row_and_missing_file(tmp_path):
    path = tmp_path / "pod_basis.csv"
    path.write_text("kind,index,values\nmeta,0,1,1e-10,retained,0\nbogus,0,1\n")
    with pytest.raises(ConfigError) as excinfo:
        read_pod_csv(path)
    assert excinfo.value.line == 3
    with pytest.raises(ConfigError):
        read_pod_csv(tmp_path / "absent.csv")
