"""Acceptance criteria, one test per criterion; each records a PASS/FAIL line."""

import json
import math
import time
from pathlib import Path

import numpy as np

from anisofrac.barriers import dy_constant
from anisofrac.cli import load_config, main, report_json, run_config
from anisofrac.core import AnisotropicBox, OperatorSpec, eta, kernel_constant
from anisofrac.experiments import maximum_principle_check, non_additivity_demo, verify_dy, verify_main
from anisofrac.catalog import from_config, make_field
from anisofrac.operator import QuadratureSpec, symbol_oracle
from anisofrac.solver import Grid, assemble, comparison_check
from anisofrac.core import zero_field

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_criterion_01_symbol_oracle(acceptance):
    start = time.perf_counter()
    worst = 0.0
    q = QuadratureSpec(rtol=1e-3)
    for s in (0.25, 0.5, 0.75):
        for k in (1, 2):
            worst = max(worst, abs(symbol_oracle(s, k, q) - k ** (2 * s)) / k ** (2 * s))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-3 and elapsed < 10
    acceptance(1, ok, f"symbol oracle max rel err {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_02_barrier_identity(acceptance):
    cases = [(N, s, d) for N, s in [(1, 0.3), (1, 0.5), (1, 0.75), (2, 0.5)] for d in (0.5, 1.0, 2.0)]
    start = time.perf_counter()
    rep = verify_dy(cases, points=10, seed=0)
    elapsed = time.perf_counter() - start
    ok = len(cases) == 12 and rep.lhs < 1e-3 and elapsed < 60
    acceptance(2, ok, f"barrier identity max dev {rep.lhs:.2e} over {len(cases)} cases x 10 points, {elapsed:.1f}s")
    assert ok


def test_criterion_03_constants(acceptance):
    eta_err = max(abs(eta(N, 1 - 1e-3) - 1 / (2 * N)) for N in (1, 2, 3))
    c_err = abs(kernel_constant(1, 0.5) - 1 / (2 * math.pi))
    dy_exact = all(dy_constant(N, 1.0) == 2 * N for N in range(1, 6))
    ok = eta_err < 1e-2 and c_err < 1e-10 * (1 / (2 * math.pi)) and dy_exact
    acceptance(3, ok, f"eta near s=1 err {eta_err:.2e}, c_(1,1/2) err {c_err:.1e}, dy_constant(N,1)=2N {dy_exact}")
    assert ok


def test_criterion_04_main_suite(acceptance):
    cfg = load_config(CONFIGS / "main-suite.json")
    start = time.perf_counter()
    reports = []
    exps = set()
    for case in cfg["cases"]:
        spec = OperatorSpec.from_dict(case["operator"])
        assert spec.n == 2 and spec.m == 2 and spec.dims[0] == 1
        assert 2 * case["grid"] + 1 <= 128
        exps.add(spec.s[0])
        reports.append(verify_main(spec, case["d"], from_config(case["f"], 2), from_config(case["exterior"], 2),
                                   case["grid"], name=case["name"]))
    elapsed = time.perf_counter() - start
    bad = [r.name for r in reports if not r.verdict]
    bad += [r.name + "/barrier" for r in reports if r.provenance["barrier_domination"]["verdict"] != "pass"]
    ok = len(reports) >= 5 and exps == {0.3, 0.6, 0.9} and not bad and elapsed < 300
    acceptance(4, ok, f"{len(reports)} main-estimate configs, violations {bad or 0}, {elapsed:.1f}s")
    assert ok


def test_criterion_05_maximum_principle(acceptance):
    cfg = load_config(CONFIGS / "max-principle.json")
    violations, min_u = 0, math.inf
    for case in cfg["cases"]:
        spec = OperatorSpec.from_dict(case["operator"])
        box = AnisotropicBox(tuple(case["d"]), case.get("kappa", 1.0))
        res = maximum_principle_check(spec, box, from_config(case["f"], 2), case["grid"])
        violations += len(res["violations"])
        min_u = min(min_u, res["min_u"])
    # a sweep of further exponents, coefficients and aspect ratios
    rng = np.random.default_rng(7)
    for _ in range(20):
        s = float(rng.uniform(0.05, 0.95))
        spec = OperatorSpec.build((1, 1), (s, 1.0), (float(rng.uniform(0, 3)), float(rng.uniform(0.1, 3))))
        grid = Grid(AnisotropicBox((float(rng.uniform(0.2, 2)), 1.0)), tuple(int(c) for c in rng.integers(3, 30, 2)))
        violations += len(comparison_check(assemble(spec, grid, zero_field(2))).violations)
    ok = violations == 0 and min_u >= -1e-10
    acceptance(5, ok, f"comparison violations {violations}, min u {min_u:.2e}")
    assert ok


def test_criterion_06_tail_bound(acceptance):
    cfg = load_config(CONFIGS / "tail.json")
    cases = [c for c in cfg["cases"] if c["w"]["name"] == "annulus"]
    report = run_config(dict(cfg, cases=cases))
    combos = {(c["R"], c["operator"]["s"][0]) for c in cases}
    rows = report["results"]
    margins = [r["margin"] for r in rows]
    strict = all(r["provenance"]["strict"] and r["lhs"] + r["slack"] < r["rhs"] for r in rows)
    ok = combos == {(1.0, 0.5), (1.0, 0.75), (2.0, 0.5), (2.0, 0.75)} and strict and min(margins) > 0
    acceptance(6, ok, "tail bound " + ", ".join(
        f"{r['name']}: {r['lhs']:.3g} < {r['rhs']:.3g}" for r in rows))
    assert ok


def test_criterion_07_rigidity(acceptance):
    cfg = load_config(CONFIGS / "rigidity.json")
    case = cfg["cases"][0]
    assert case["operator"]["s"][0] == 0.75 and case["radii"] == [2.0, 4.0, 8.0]
    start = time.perf_counter()
    sweep = run_config(dict(cfg, cases=[case]))["results"][0]["sweep"]
    elapsed = time.perf_counter() - start
    q = [r["quotient"] for r in sweep["rows"]]
    ok = sweep["bound_decreasing"] and sweep["final_ratio"] <= 0.6 and sweep["bounds_hold"] and elapsed < 300
    acceptance(7, ok, f"quotients {[round(v, 4) for v in q]}, ratio R=8/R=2 {sweep['final_ratio']:.3f}, "
                      f"bound exponent {sweep['rhs_exponent']:.2f}, {elapsed:.1f}s")
    assert ok


def test_criterion_08_non_additivity(acceptance):
    rep = non_additivity_demo(0.5, make_field("bump", 2, radius=1.0))
    unc = rep.provenance["uncertainty"]
    ok = rep.provenance["gap"] > 10 * unc
    acceptance(8, ok, f"gap {rep.provenance['gap']:.3g} vs 10x uncertainty {10 * unc:.2e}")
    assert ok


def test_criterion_09_manufactured_solution(acceptance):
    cfg = load_config(CONFIGS / "mms.json")
    results = run_config(cfg)["results"]
    seen = {r["s"][0] for r in results}
    decreasing = all(all(b < a for a, b in zip(r["errors"], r["errors"][1:])) for r in results)
    order = min(r["min_order"] for r in results)
    ok = seen == {0.3, 0.5, 0.75} and decreasing and order >= 1
    acceptance(9, ok, f"manufactured solution min observed order {order:.2f}")
    assert ok


def test_criterion_10_determinism(acceptance, tmp_path):
    mismatched = []
    configs = sorted(CONFIGS.glob("*.json"))
    for path in configs:
        bodies = []
        for k in range(2):
            out = tmp_path / f"{path.stem}-{k}"
            main(["run", str(path), "--out", str(out)])
            body = json.loads((out / f"{path.stem}.report.json").read_text())
            body.pop("timestamp")
            bodies.append(report_json(body, timestamp="-"))
        if bodies[0] != bodies[1]:
            mismatched.append(path.stem)
    ok = not mismatched and len(configs) >= 9
    acceptance(10, ok, f"{len(configs)} shipped configs run twice, mismatches {mismatched or 0}")
    assert ok
