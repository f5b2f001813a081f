"""Command-line entry point: run experiment configs, list built-in fields, print constants."""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import catalog
from .barriers import dy_constant
from .core import AnisotropicBox, ConfigurationError, OperatorSpec, kernel_constant
from .estimates import EstimateReport, PowerLaw, c_tilde, tail_constant
from .operator import QuadratureSpec, symbol_oracle

SCHEMA_VERSION = 1
EXPERIMENTS = (
    "symbol", "dy", "main", "tail", "rigidity", "non-additivity", "mms", "max-principle",
    "second-derivative",
)


class ConfigError(ConfigurationError):
    pass


# ---------------------------------------------------------------- config helpers

def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"{where}: missing field {key!r}")
    return obj[key]


def _spec(entry) -> OperatorSpec:
    if not isinstance(entry, dict):
        raise ConfigError("operator must be an object with dims, s, a")
    return OperatorSpec.from_dict(entry)


def _quad(entry) -> QuadratureSpec:
    return QuadratureSpec.from_dict(entry) if entry else QuadratureSpec()


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    validate(cfg)
    return cfg


def validate(cfg) -> None:
    """Structural and domain checks before any computation starts."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if cfg.get("v") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported config version {cfg.get('v')!r} (expected {SCHEMA_VERSION})")
    exp = _require(cfg, "experiment", "config")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; choose from {', '.join(EXPERIMENTS)}")
    cases = _require(cfg, "cases", "config")
    if not isinstance(cases, list) or not cases:
        raise ConfigError("'cases' must be a nonempty list")
    for k, case in enumerate(cases):
        if not isinstance(case, dict):
            raise ConfigError(f"case {k} must be an object")
        where = f"case {k}"
        if "operator" in case:
            spec = _spec(case["operator"])
            for key in ("f", "exterior", "w", "field"):
                if key in case:
                    catalog.from_config(case[key], spec.n)
        if "quadrature" in case:
            _quad(case["quadrature"])
        if exp == "dy":
            for N, s, d in _require(case, "profiles", where):
                if not 0 < float(s) <= 1:
                    raise ConfigError(f"exponent {s!r} out of (0,1]")
                if not float(d) > 0 or int(N) < 1:
                    raise ConfigError(f"{where}: bad profile ({N}, {s}, {d})")
        if exp == "symbol":
            s = float(_require(case, "s", where))
            if not 0 < s < 1:
                raise ConfigError(f"exponent {s!r} out of (0,1)")
            if float(_require(case, "k", where)) == 0:
                raise ConfigError(f"{where}: wavenumber must be nonzero")
        if exp == "non-additivity":
            s = float(_require(case, "s", where))
            if not 0 < s < 1:
                raise ConfigError(f"exponent {s!r} out of (0,1)")
        if exp in ("main", "tail", "rigidity", "mms", "max-principle", "second-derivative"):
            _require(case, "operator", where)
        if exp == "main":
            AnisotropicBox(tuple(_require(case, "d", where)))


# ---------------------------------------------------------------- case runners

def _field(case, key, n, default="zero"):
    return catalog.from_config(case.get(key, default), n)


def _run_symbol(case):
    q = _quad(case.get("quadrature", {"rtol": 1e-3}))
    s, k = float(case["s"]), float(case["k"])
    ev = symbol_oracle(s, k, q, full_output=True)
    exact = abs(k) ** (2 * s)
    rel = abs(ev.value - exact) / exact
    tol = float(case.get("tol", 1e-3))
    rep = EstimateReport(f"symbol s={s:g} k={k:g}", rel, tol, 0.0,
                         {"value": ev.value, "exact": exact, "uncertainty": ev.uncertainty})
    return [rep.to_dict()]


def _run_dy(case):
    from .experiments import verify_dy

    q = _quad(case.get("quadrature"))
    rep = verify_dy([tuple(p) for p in case["profiles"]], int(case.get("points", 10)),
                    int(case.get("seed", 0)), q, float(case.get("tol", 1e-3)))
    return [rep.to_dict()]


def _run_main(case):
    from .experiments import verify_main

    spec = _spec(case["operator"])
    rep = verify_main(spec, case["d"], _field(case, "f", spec.n), _field(case, "exterior", spec.n),
                      case.get("grid", 63), name=case.get("name", "main"))
    dom = rep.provenance["barrier_domination"]
    out = rep.to_dict()
    return [out, dict(dom, name=f"{out['name']}/barrier")]


def _ring_norms(entry):
    if entry is None:
        return PowerLaw(1.0)
    if isinstance(entry, (int, float)):
        return PowerLaw(float(entry))
    return PowerLaw(float(entry.get("M", 1.0)), float(entry.get("beta", 0.0)))


def _run_tail(case):
    from .experiments import verify_tail

    spec = _spec(case["operator"])
    w = _field(case, "w", spec.n)
    rep = verify_tail(spec, float(case["R"]), w, _ring_norms(case.get("ring_norms")),
                      samples=int(case.get("samples", 9)), name=case.get("name", "tail"))
    out = rep.to_dict()
    if not rep.provenance["strict"]:
        out["verdict"] = "fail"
    return [out]


def _run_rigidity(case):
    from .experiments import rigidity_sweep

    spec = _spec(case["operator"])
    sw = rigidity_sweep(spec, _field(case, "f", spec.n), _field(case, "exterior", spec.n),
                        case.get("radii", [2, 4, 8]), case.get("grid", 63))
    ratio_max = float(case.get("max_final_ratio", 0.6))
    ok = sw.strictly_decreasing and sw.bound_decreasing and sw.bounds_hold and sw.final_ratio <= ratio_max
    return [{"name": case.get("name", "rigidity"), "verdict": "pass" if ok else "fail",
             "sweep": sw.to_dict(), "csv": sw.to_csv()}]


def _run_non_additivity(case):
    from .experiments import non_additivity_demo

    fld = _field(case, "field", 2, default="bump")
    return [non_additivity_demo(float(case["s"]), fld).to_dict()]


def _run_mms(case):
    from .experiments import mms_study

    spec = _spec(case["operator"])
    res = mms_study(spec, case.get("half_widths", [1.0] * spec.n), case.get("radii", [1.6] * spec.n),
                    case.get("counts", [15, 31, 63]))
    min_order = float(case.get("min_order", 1.0))
    errs = res["errors"]
    ok = all(b < a for a, b in zip(errs, errs[1:])) and res["min_order"] >= min_order
    return [dict(res, name=case.get("name", "mms"), verdict="pass" if ok else "fail")]


def _run_max_principle(case):
    from .experiments import maximum_principle_check

    spec = _spec(case["operator"])
    box = AnisotropicBox(tuple(case.get("d", [1.0] * spec.m)), case.get("kappa", 1.0))
    res = maximum_principle_check(spec, box, _field(case, "f", spec.n, "bump"), case.get("grid", 63))
    return [dict(res, name=case.get("name", "max-principle"), verdict="pass" if res["ok"] else "fail")]


def _run_second_derivative(case):
    from .experiments import second_derivative_bound

    spec = _spec(case["operator"])
    rep = second_derivative_bound(spec, _field(case, "f", spec.n, "bump"), _field(case, "exterior", spec.n),
                                  case.get("grid", 63))
    return [rep.to_dict()]


RUNNERS = {
    "symbol": _run_symbol, "dy": _run_dy, "main": _run_main, "tail": _run_tail,
    "rigidity": _run_rigidity, "non-additivity": _run_non_additivity, "mms": _run_mms,
    "max-principle": _run_max_principle, "second-derivative": _run_second_derivative,
}


def _run_case(args):
    experiment, case = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return RUNNERS[experiment](case)


def run_config(cfg: dict, jobs: int = 1) -> dict:
    experiment = cfg["experiment"]
    tasks = [(experiment, case) for case in cfg["cases"]]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_case, tasks))
    else:
        chunks = [_run_case(t) for t in tasks]
    results = [r for chunk in chunks for r in chunk]
    return {
        "v": SCHEMA_VERSION,
        "experiment": experiment,
        "config": cfg,
        "results": results,
        "pass": all(r.get("verdict") == "pass" for r in results),
    }


# ---------------------------------------------------------------- output

def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def report_json(report: dict, timestamp: str | None = None) -> str:
    body = dict(_clean(report))
    body["timestamp"] = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat()
    return json.dumps(body, sort_keys=True, indent=2) + "\n"


def report_csv(report: dict) -> str:
    lines = ["name,lhs,rhs,slack,verdict"]
    for r in report["results"]:
        vals = [str(r.get("name", "")), repr(r.get("lhs", "")), repr(r.get("rhs", "")),
                repr(r.get("slack", "")), str(r.get("verdict", ""))]
        lines.append(",".join(v.strip("'") for v in vals))
    return "\n".join(lines) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- commands

def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TypeError, ValueError) as exc:
        print(f"error: malformed config: {exc}", file=sys.stderr)
        return 2
    try:
        report = run_config(cfg, jobs=args.jobs)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    stem = Path(args.config).stem
    write_atomic(out / f"{stem}.report.json", report_json(report))
    write_atomic(out / f"{stem}.csv", report_csv(report))
    for r in report["results"]:
        if "csv" in r:
            write_atomic(out / f"{stem}.{r['name']}.series.csv", r["csv"])
    for r in report["results"]:
        print(f"{r.get('verdict', '?'):4}  {r.get('name', '')}")
    print("PASS" if report["pass"] else "FAIL")
    return 0 if report["pass"] else 1


def cmd_list(args) -> int:
    if args.name:
        try:
            print(json.dumps(catalog.schema(args.name), indent=2, sort_keys=True))
        except ConfigurationError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        return 0
    if args.json:
        print(json.dumps(catalog.catalog(), indent=2, sort_keys=True))
        return 0
    for entry in catalog.catalog():
        params = ", ".join(f"{p['name']}={p['default']}" for p in entry["params"])
        print(f"{entry['name']:16} {entry['doc']}")
        if params:
            print(f"{'':16}   params: {params}")
    return 0


def constants_table(spec: OperatorSpec) -> dict:
    rows = []
    for i, (N, s, a) in enumerate(zip(spec.dims, spec.s, spec.a), start=1):
        rows.append({
            "group": i, "N": N, "s": s, "a": a, "eta": spec.etas()[i - 1],
            "c_Ns": kernel_constant(N, s) if s < 1 else None, "dy_constant": dy_constant(N, s),
        })
    return {"groups": rows, "C_tilde": c_tilde(spec), "C_o": tail_constant(spec), "sigma": spec.sigma}


def cmd_constants(args) -> int:
    try:
        text = Path(args.spec).read_text() if os.path.exists(args.spec) else args.spec
        data = json.loads(text)
        spec = OperatorSpec.from_dict(data.get("operator", data))
    except (json.JSONDecodeError, OSError) as exc:
        print(f"error: cannot read spec: {exc}", file=sys.stderr)
        return 2
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    table = constants_table(spec)
    if args.json:
        print(json.dumps(table, indent=2, sort_keys=True))
        return 0
    print(f"{'i':>2} {'N':>2} {'s':>8} {'a':>8} {'c_Ns':>14} {'eta':>14}")
    for r in table["groups"]:
        c = "-" if r["c_Ns"] is None else f"{r['c_Ns']:.10g}"
        print(f"{r['group']:>2} {r['N']:>2} {r['s']:>8g} {r['a']:>8g} {c:>14} {r['eta']:>14.10g}")
    print(f"C_tilde = {table['C_tilde']:.10g}")
    print(f"C_o     = {table['C_o']:.10g}")
    print(f"sigma   = {table['sigma']:.10g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="anisofrac", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--out", default=".", help="output directory")
    r.add_argument("--jobs", type=int, default=1, help="worker processes for independent cases")
    r.set_defaults(func=cmd_run)
    ls = sub.add_parser("list-builtins", help="print the field catalog")
    ls.add_argument("name", nargs="?")
    ls.add_argument("--json", action="store_true")
    ls.set_defaults(func=cmd_list)
    c = sub.add_parser("constants", help="print the constants of an operator spec (file or JSON text)")
    c.add_argument("spec")
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_constants)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
