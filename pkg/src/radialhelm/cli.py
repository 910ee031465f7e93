"""Command-line interface: solve, bench, compare, check, kernels."""

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .bench import BenchConfig, emit_report, emit_solve_report, run_benchmark
from .errors import RadialHelmError, UsageError
from .ingest import apply_scenario, load_case_native, load_scenario, parse_matpower_case
from .netmodel import build_incidence
from .solvers import METHOD_NAMES, SolveConfig, Status, prepare_method

CASES_ENV = "RADIAL_HELM_SEED_CASES"

EXIT_OK = 0
EXIT_DIVERGED = 2
EXIT_NO_SOLUTION = 3
EXIT_INPUT_ERROR = 4

_STATUS_EXIT = {
    Status.CONVERGED: EXIT_OK,
    Status.DIVERGED: EXIT_DIVERGED,
    Status.ITERATION_LIMIT: EXIT_DIVERGED,
    Status.NO_SOLUTION: EXIT_NO_SOLUTION,
    Status.INCONCLUSIVE: EXIT_NO_SOLUTION,
}


def bundled_cases_dir() -> Path:
    override = os.environ.get(CASES_ENV)
    if override:
        return Path(override)
    return Path(__file__).parent / "cases"


def _resolve_case_path(spec: str) -> Path:
    candidates = [Path(spec)]
    base = bundled_cases_dir()
    candidates += [base / spec, base / f"{spec}.m", base / f"{spec}.json"]
    for path in candidates:
        if path.is_file():
            return path
    raise UsageError(f"case {spec!r} not found (searched {base})")


def load_case(spec: str, fmt: str = None, scenario_path: str = None):
    path = _resolve_case_path(spec)
    if fmt is None:
        fmt = "native" if path.suffix == ".json" else "mat"
    text = path.read_text()
    if fmt == "mat":
        case = parse_matpower_case(text)
    elif fmt == "native":
        case = load_case_native(text)
    else:
        raise UsageError(f"unknown case format {fmt!r}")
    scenario_name = None
    if scenario_path:
        spath = Path(scenario_path)
        if not spath.is_file():
            spath = _resolve_case_path(scenario_path)
        scenario = load_scenario(spath.read_text())
        case = apply_scenario(case, scenario)
        scenario_name = scenario.name
    return case, scenario_name


def _add_case_args(parser):
    parser.add_argument("--case", required=True,
                        help="case path or bundled case name "
                             f"(searched under ${CASES_ENV})")
    parser.add_argument("--format", choices=("mat", "native"), default=None,
                        help="case format; default sniffs the file extension")
    parser.add_argument("--scenario", default=None,
                        help="scenario file applied before solving")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radialhelm",
        description="Holomorphic-embedding load flow for distribution networks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one load-flow method on a case")
    _add_case_args(p)
    p.add_argument("--method", choices=METHOD_NAMES, default="helm-lu")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-order", type=int, default=60)
    p.add_argument("--max-iterations", type=int, default=200)
    p.add_argument("--kernels", choices=("auto", "pure", "compiled"), default=None)
    p.add_argument("--z-mode", choices=("matrix", "current"), default="matrix",
                   help="shunt/impedance-load handling in the direct method")
    p.add_argument("--output", choices=("table", "json", "csv"), default="table")

    p = sub.add_parser("bench", help="time method main loops on a case")
    _add_case_args(p)
    p.add_argument("--methods", required=True,
                   help="comma-separated method list, e.g. helm-lu,s-helm,d-helm")
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--warmup", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-order", type=int, default=60)
    p.add_argument("--parallel-step5", action="store_true",
                   help="also report totals with Step 5 overlapped")
    p.add_argument("--kernels", choices=("auto", "pure", "compiled"), default=None)
    p.add_argument("--z-mode", choices=("matrix", "current"), default="matrix")
    p.add_argument("--output", choices=("table", "json", "csv"), default="table")

    p = sub.add_parser("compare", help="cross-check voltages across methods")
    _add_case_args(p)
    p.add_argument("--methods", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--z-mode", choices=("matrix", "current"), default="matrix")

    p = sub.add_parser("check", help="parse a case and report invariants")
    _add_case_args(p)

    p = sub.add_parser("kernels", help="compare pure and compiled kernel builds")
    _add_case_args(p)
    p.add_argument("--reps", type=int, default=200)
    return parser


def _cmd_solve(args) -> int:
    case, scen = load_case(args.case, args.format, args.scenario)
    config = SolveConfig(eps=args.tol, max_order=args.max_order,
                         max_iterations=args.max_iterations,
                         kernels=args.kernels, z_mode=args.z_mode)
    report = prepare_method(case, args.method, config).run()
    print(emit_solve_report(report, args.output))
    return _STATUS_EXIT[report.status]


def _cmd_bench(args) -> int:
    case, scen = load_case(args.case, args.format, args.scenario)
    config = BenchConfig(methods=[m.strip() for m in args.methods.split(",") if m.strip()],
                         repetitions=args.reps, warmup=args.warmup,
                         eps=args.tol, max_order=args.max_order,
                         scenario=scen, output=args.output,
                         parallel_step5_analysis=args.parallel_step5,
                         kernels=args.kernels, z_mode=args.z_mode)
    report = run_benchmark(case, config)
    print(emit_report(report, args.output))
    statuses = {s.status for s in report.results}
    for status in (Status.DIVERGED, Status.ITERATION_LIMIT):
        if status in statuses:
            return EXIT_DIVERGED
    for status in (Status.NO_SOLUTION, Status.INCONCLUSIVE):
        if status in statuses:
            return EXIT_NO_SOLUTION
    return EXIT_OK


def _cmd_compare(args) -> int:
    case, scen = load_case(args.case, args.format, args.scenario)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    config = BenchConfig(methods=methods, repetitions=1, warmup=0,
                         eps=args.tol, scenario=scen, z_mode=args.z_mode)
    report = run_benchmark(case, config)
    for s in report.results:
        print(f"{s.method:<9} {s.status:<19} "
              f"orders/iterations {s.orders_or_iterations:>4}  "
              f"max mismatch {s.max_mismatch:.3e}")
    if report.max_voltage_discrepancy is not None:
        print(f"max |V| discrepancy over converged methods: "
              f"{report.max_voltage_discrepancy:.6e}")
    else:
        print("fewer than two methods converged; no discrepancy to report")
    statuses = {s.status for s in report.results}
    if Status.DIVERGED in statuses or Status.ITERATION_LIMIT in statuses:
        return EXIT_DIVERGED
    if Status.NO_SOLUTION in statuses or Status.INCONCLUSIVE in statuses:
        return EXIT_NO_SOLUTION
    return EXIT_OK


def _cmd_check(args) -> int:
    case, scen = load_case(args.case, args.format, args.scenario)
    case.validate()
    incidence = build_incidence(case)
    from .netmodel import assemble_admittance
    adm = assemble_admittance(case)
    row_sums = np.abs(np.asarray(adm.Y_series.sum(axis=1))).max()
    col_sums = np.abs(np.asarray(incidence.A.sum(axis=0))).max()
    split_err = abs(adm.Y_full - (adm.Y_series + sp.diags(adm.Y_shunt))).max()
    print(f"case {case.name}: {len(case.buses)} buses, "
          f"{len(case.live_branches())} in-service branches, "
          f"topology {incidence.topology.value}")
    print(f"slack node {case.slack_id}, V0 = {case.slack_v0}")
    print(f"max |Y_series row sum|     : {row_sums:.3e}")
    print(f"max |incidence column sum| : {col_sums:.3e}")
    print(f"max |Y_full - split|       : {split_err:.3e}")
    if scen:
        print(f"scenario applied: {scen}")
    return EXIT_OK


def _cmd_kernels(args) -> int:
    case, _ = load_case(args.case, args.format, args.scenario)
    names = _kernels.available()
    if "compiled" not in names:
        print("compiled kernels unavailable; showing pure only")
    incidence = build_incidence(case)
    n = case.n_pq
    rng = np.random.default_rng(7)
    rhs = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    print(f"case {case.name}: {n} PQ nodes, {args.reps} repetitions per kernel")
    for name in names:
        impl = _kernels.get(name)
        row = [f"{name:<9}"]
        if incidence.order_fwd is not None:
            schedule = impl.make_sweep_schedule(incidence.order_fwd,
                                                incidence.parent_idx, incidence.z_in)
            t0 = time.perf_counter()
            for _ in range(args.reps):
                impl.sweep_solve(schedule, rhs)
            row.append(f"sweep {1e6 * (time.perf_counter() - t0) / args.reps:9.3f} us")
        V = np.ones((31, n), dtype=np.complex128)
        W = np.empty_like(V)
        W[0] = 1.0
        t0 = time.perf_counter()
        for _ in range(args.reps):
            for order in range(1, 31):
                impl.reciprocal_update(V, W, order)
        row.append(f"reciprocal(30) {1e6 * (time.perf_counter() - t0) / args.reps:9.3f} us")
        coeffs = [np.ascontiguousarray(rhs * (0.5 ** k)) for k in range(31)]
        t0 = time.perf_counter()
        for _ in range(args.reps):
            acc = impl.EpsilonAccelerator(n, 33)
            for order in range(31):
                acc.update(coeffs[order])
        row.append(f"epsilon(30) {1e6 * (time.perf_counter() - t0) / args.reps:9.3f} us")
        print("  ".join(row))

    for name in names:
        config = SolveConfig(kernels=name)
        prepared = prepare_method(case, "s-helm" if incidence.order_fwd is not None
                                  else "d-helm", config)
        for _ in range(5):
            prepared.run()
        t0 = time.perf_counter()
        for _ in range(args.reps):
            report = prepared.run()
        dt = (time.perf_counter() - t0) / args.reps
        print(f"{prepared.method} main loop with {name:<9} kernels: "
              f"{1e3 * dt:8.4f} ms ({report.status})")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"solve": _cmd_solve, "bench": _cmd_bench, "compare": _cmd_compare,
                "check": _cmd_check, "kernels": _cmd_kernels}
    try:
        return handlers[args.command](args)
    except RadialHelmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
