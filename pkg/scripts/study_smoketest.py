#!/usr/bin/env python3
"""
Smoke test script that runs the four desk-scale studies and checks the
acceptance bounds. Results land under results/smoketest/<study>.
"""
import csv
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from errors import VarsepError  # noqa: E402
from experiments import load_experiment_config, run_command  # noqa: E402

CONFIGS = ROOT / "configs"
OUT = ROOT / "results" / "smoketest"


def run_study(command: str, config: str):
    cfg = load_experiment_config(command, str(CONFIGS / config), output_dir=str(OUT / command))
    return run_command(cfg)


def check(label: str, ok: bool, detail: str) -> bool:
    print(f"{'✅' if ok else '❌'} {label}: {detail}")
    return ok


def test_fig1():
    """HiMod and PGD against the desk reference"""
    print("🔍 Running fig1 (two-source advection test)...")
    m = run_study("fig1", "two_source.ini").metrics
    ok = check("HiMod error <= 1.2e-2", m["himod_error"] <= 1.2e-2, f"{m['himod_error']:.3e}")
    return check("PGD error <= 1.2e-2", m["pgd_error"] <= 1.2e-2, f"{m['pgd_error']:.3e}") and ok


def test_table1():
    """Mode count trend over tol_fp"""
    print("\n🔍 Running table1 (PGD tolerance sweep)...")
    m = run_study("table1", "two_source.ini").metrics
    counts = [m.get(f"m[tol_e=0.02,tol_fp={tol}]") for tol in ("0.1", "0.01", "0.001")]
    if None in counts:
        return check("all tol_e=2e-2 cells converged", False, str(counts))
    ok = check("m nonincreasing in tol_fp", counts == sorted(counts, reverse=True), str(counts))
    with open(OUT / "table1" / "table1.csv", newline="") as handle:
        counts_fp = [
            int(n) for row in csv.DictReader(handle) if row["tol_e"] == "0.02" for n in row["fp_iterations"].split(";") if n
        ]
    worst = max(counts_fp, default=0)
    return check("fixed-point counts <= 10", worst <= 10, f"max {worst}") and ok


def test_fig2():
    """Parametric PGD against FE at several mu"""
    print("\n🔍 Running fig2 (parametric PGD)...")
    m = run_study("fig2", "inlet_channel.ini").metrics
    ok = True
    for mu in ("1", "2.5"):
        ok = check(f"error at mu={mu} <= 5e-2", m[f"error[mu={mu}]"] <= 5e-2, f"{m[f'error[mu={mu}]']:.3e}") and ok
    return check("error(mu=5) <= error(mu=1)", m["error[mu=5]"] <= m["error[mu=1]"], f"{m['error[mu=5]']:.3e}") and ok


def test_fig3():
    """HiPOD basis size, error table and speedup"""
    print("\n🔍 Running fig3 (HiPOD)...")
    m = run_study("fig3", "inlet_channel.ini").metrics
    ok = check(
        "l == 5 (literal 6)",
        m["l"] == 5 and m["l_literal"] == 6,
        f"l={m['l']:g} (retained {m['l_retained']:g}, literal {m['l_literal']:g})",
    )
    ok = check("error(l=1, mu=1) in [1e-3, 1e-1]", 1e-3 <= m["error[l=1,mu=1]"] <= 1e-1, f"{m['error[l=1,mu=1]']:.3e}") and ok
    ok = check(
        "error(l=4, mu=2.5) in [1e-9, 1e-5]", 1e-9 <= m["error[l=4,mu=2.5]"] <= 1e-5, f"{m['error[l=4,mu=2.5]']:.3e}"
    ) and ok
    ok = check("error(l=8, mu=2.5) <= 1e-10", m["error[l=8,mu=2.5]"] <= 1e-10, f"{m['error[l=8,mu=2.5]']:.3e}") and ok
    return check("speedup >= 100", m["speedup"] >= 100.0, f"x{m['speedup']:.1f}") and ok


def main():
    """Run all studies"""
    print("🚀 varsep-mor Desk-Scale Smoke Test")
    print("=" * 50)

    tests = [
        ("fig1 HiMod/PGD accuracy", test_fig1),
        ("table1 trends", test_table1),
        ("fig2 parametric PGD", test_fig2),
        ("fig3 HiPOD", test_fig3),
    ]

    results = []
    for test_name, test_func in tests:
        try:
            results.append((test_name, test_func()))
        except VarsepError as e:
            print(f"❌ {test_name} failed: {e}")
            results.append((test_name, False))

    print("\n" + "=" * 50)
    print("📊 Test Results Summary:")
    passed = 0
    for test_name, result in results:
        print(f"  {'✅ PASS' if result else '❌ FAIL'} {test_name}")
        passed += bool(result)

    print(f"\n🎯 {passed}/{len(results)} studies passed")
    sys.exit(0 if passed == len(results) else 1)


if __name__ == "__main__":
    main()
