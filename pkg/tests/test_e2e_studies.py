"""
End-to-end acceptance runs of the four studies at desk scale.
These tests require VARSEP_E2E=1 environment variable to run.
"""
import csv
import os
from pathlib import Path

import pytest

from experiments import load_experiment_config, run_command

# Skip all tests unless VARSEP_E2E=1 is set
pytestmark = pytest.mark.skipif(
    os.getenv("VARSEP_E2E") != "1",
    reason="VARSEP_E2E environment variable not set to 1. Set VARSEP_E2E=1 to run desk-scale studies."
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run_study(command, config, out, mu=None):
    cfg = load_experiment_config(command, str(CONFIGS / config), output_dir=str(out))
    return run_command(cfg, mu)


class TestAdvectionStudy:
    @pytest.fixture(scope="class")
    def fig1(self, tmp_path_factory):
        return run_study("fig1", "two_source.ini", tmp_path_factory.mktemp("fig1"))

    def test_himod_error(self, fig1):
        assert fig1.metrics["himod_error"] <= 1.2e-2

    def test_pgd_error_with_six_modes(self, fig1):
        assert fig1.metrics["pgd_modes"] == 6
        assert fig1.metrics["pgd_error"] <= 1.2e-2


def test_table1_trends(tmp_path):
    result = run_study("table1", "two_source.ini", tmp_path)
    counts = [result.metrics[f"m[tol_e=0.02,tol_fp={tol_fp}]"] for tol_fp in ("0.1", "0.01", "0.001")]
    assert counts == sorted(counts, reverse=True)
    assert max(counts) <= 6
    with open(tmp_path / "table1.csv", newline="") as handle:
        for row in (r for r in csv.DictReader(handle) if r["tol_e"] == "0.02"):
            assert row["status"] == "ok"
            assert all(int(n) <= 10 for n in row["fp_iterations"].split(";"))


def test_parametric_pgd_tracks_fe(tmp_path):
    result = run_study("fig2", "inlet_channel.ini", tmp_path)
    assert result.metrics["error[mu=1]"] <= 5e-2
    assert result.metrics["error[mu=2.5]"] <= 5e-2
    assert result.metrics["error[mu=5]"] <= result.metrics["error[mu=1]"]


class TestHiPOD:
    @pytest.fixture(scope="class")
    def fig3(self, tmp_path_factory):
        return run_study("fig3", "inlet_channel.ini", tmp_path_factory.mktemp("fig3"))

    def test_basis_size(self, fig3):
        assert fig3.metrics["l"] == 5
        assert fig3.metrics["l_retained"] == 5
        assert fig3.metrics["l_literal"] == 6

    def test_error_table_orders(self, fig3):
        m = fig3.metrics
        assert 1e-3 <= m["error[l=1,mu=1]"] <= 1e-1
        assert 1e-9 <= m["error[l=4,mu=2.5]"] <= 1e-5
        assert m["error[l=8,mu=2.5]"] <= 1e-10
        for mu in ("1", "2.5"):
            errors = [m[f"error[l={level},mu={mu}]"] for level in (1, 4, 6, 8)]
            assert all(later < earlier for earlier, later in zip(errors, errors[1:]))

    def test_speedup(self, fig3):
        assert fig3.metrics["speedup"] >= 100.0
