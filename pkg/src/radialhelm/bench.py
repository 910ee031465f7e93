"""Benchmark harness: repetition timing, step shares, method comparison.

Preparation (admittance assembly, factorizations, schedules, operator
builds) happens before the timed region; each repetition times only a
solver's main loop. Statistics are deterministic under an injected clock.
"""

import csv
import io
import json
import statistics
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InsufficientResultsError, TopologyError, UsageError
from .instrumentation import prep_counter
from .netmodel import NetworkCase, Topology, build_incidence
from .solvers import (HELM_VARIANTS, METHOD_NAMES, SolveConfig, SolveReport,
                      Status, StepTimings, prepare_method)


@dataclass
class BenchConfig:
    methods: list
    repetitions: int = 1000
    warmup: int = 10
    eps: float = 1e-6
    max_order: int = 60
    max_iterations: int = 200
    scenario: Optional[str] = None      # label of the applied scenario, if any
    output: str = "table"
    parallel_step5_analysis: bool = False
    kernels: Optional[str] = None
    z_mode: str = "matrix"
    clock: callable = time.perf_counter

    def validate(self):
        if not self.methods:
            raise UsageError("no methods requested")
        for m in self.methods:
            if m not in METHOD_NAMES:
                raise UsageError(f"unknown method {m!r}; expected one of {METHOD_NAMES}")
        if self.repetitions < 1:
            raise UsageError("repetitions must be >= 1")
        if self.warmup < 0:
            raise UsageError("warmup must be >= 0")
        if self.eps <= 0:
            raise UsageError("eps must be positive")
        if self.output not in ("table", "json", "csv"):
            raise UsageError(f"unknown output format {self.output!r}")

    def solve_config(self) -> SolveConfig:
        return SolveConfig(eps=self.eps, max_order=self.max_order,
                           max_iterations=self.max_iterations,
                           kernels=self.kernels, z_mode=self.z_mode,
                           clock=self.clock)


@dataclass
class MethodStats:
    method: str
    status: str
    orders_or_iterations: int
    mean_s: float
    median_s: float
    min_s: float
    max_mismatch: float
    step_shares: Optional[dict] = None      # HELM rows: percent per step group
    step4_mean_s: Optional[float] = None
    steps23_mean_s: Optional[float] = None
    step5_mean_s: Optional[float] = None
    adjusted_mean_s: Optional[float] = None  # with Step 5 overlapped
    prep_events_timed: int = 0               # factorizations inside timed region
    report: SolveReport = field(default=None, repr=False)


@dataclass
class BenchReport:
    case_name: str
    n_nodes: int
    repetitions: int
    warmup: int
    kernel_impl: str
    scenario: Optional[str]
    results: list
    max_voltage_discrepancy: Optional[float]
    step4_savings: dict = field(default_factory=dict)
    overall_savings: dict = field(default_factory=dict)
    adjusted_savings: dict = field(default_factory=dict)


def parallel_step5_projection(timings: StepTimings) -> float:
    """Total time with Step 5 of each order overlapped with the next order.

    Step 5 of order k hides under steps 2-4 of order k+1; the final order's
    check cannot overlap anything. Purely analytic on recorded durations.
    """
    t23 = timings.per_order_steps23
    t4 = timings.per_order_step4
    t5 = timings.per_order_step5
    hidden = sum(min(t5[k], t23[k + 1] + t4[k + 1]) for k in range(len(t5) - 1))
    return timings.t_total - hidden


def compare_voltages(reports) -> float:
    """Max |V| magnitude spread over all node/method pairs that converged."""
    converged = [r for r in reports if r.status == Status.CONVERGED]
    if len(converged) < 2:
        raise InsufficientResultsError(
            f"need >= 2 converged reports, have {len(converged)}")
    mags = [np.abs(r.voltages) for r in converged]
    worst = 0.0
    for a in range(len(mags)):
        for b in range(a + 1, len(mags)):
            worst = max(worst, float(np.max(np.abs(mags[a] - mags[b]))))
    return worst


def _check_applicability(case: NetworkCase, methods):
    topology = build_incidence(case).topology
    if topology is Topology.WEAKLY_MESHED:
        bad = [m for m in methods if m in ("bfs", "s-helm")]
        if bad:
            raise TopologyError(
                f"methods {bad} require a radial network; case is weakly meshed")


def run_benchmark(case: NetworkCase, config: BenchConfig) -> BenchReport:
    config.validate()
    _check_applicability(case, config.methods)
    clock = config.clock
    results = []
    for method in config.methods:
        prepared = prepare_method(case, method, config.solve_config())
        for _ in range(config.warmup):
            prepared.run()
        samples = []
        report = None
        sum23 = sum4 = sum5 = 0.0
        per23 = per4 = per5 = None
        prep_before = prep_counter.total()
        for _ in range(config.repetitions):
            t0 = clock()
            report = prepared.run()
            samples.append(clock() - t0)
            t = report.timings
            sum23 += t.t_steps23
            sum4 += t.t_step4
            sum5 += t.t_step5
            if t.per_order_step5:
                if per23 is None:
                    per23 = np.array(t.per_order_steps23)
                    per4 = np.array(t.per_order_step4)
                    per5 = np.array(t.per_order_step5)
                else:
                    per23 += t.per_order_steps23
                    per4 += t.per_order_step4
                    per5 += t.per_order_step5
        prep_delta = prep_counter.total() - prep_before

        reps = config.repetitions
        stats = MethodStats(
            method=method,
            status=report.status,
            orders_or_iterations=report.orders_or_iterations,
            mean_s=statistics.fmean(samples),
            median_s=statistics.median(samples),
            min_s=min(samples),
            max_mismatch=report.max_mismatch,
            prep_events_timed=prep_delta,
            report=report,
        )
        if method in HELM_VARIANTS:
            step_sum = sum23 + sum4 + sum5
            if step_sum > 0:
                stats.step_shares = {
                    "steps23": 100.0 * sum23 / step_sum,
                    "step4": 100.0 * sum4 / step_sum,
                    "step5": 100.0 * sum5 / step_sum,
                }
            stats.steps23_mean_s = sum23 / reps
            stats.step4_mean_s = sum4 / reps
            stats.step5_mean_s = sum5 / reps
            if config.parallel_step5_analysis and per5 is not None:
                hidden = sum(min(per5[k], per23[k + 1] + per4[k + 1])
                             for k in range(len(per5) - 1))
                stats.adjusted_mean_s = stats.mean_s - hidden / reps
        results.append(stats)

    discrepancy = None
    converged = [s.report for s in results if s.status == Status.CONVERGED]
    if len(converged) >= 2:
        discrepancy = compare_voltages([s.report for s in results])

    savings = {}
    overall = {}
    adjusted_savings = {}
    base = next((s for s in results if s.method == "helm-lu"), None)
    if base is not None and base.step4_mean_s:
        for s in results:
            if s.method in ("s-helm", "d-helm") and s.step4_mean_s is not None:
                savings[s.method] = 1.0 - s.step4_mean_s / base.step4_mean_s
                overall[s.method] = 1.0 - s.mean_s / base.mean_s
                if s.adjusted_mean_s is not None and base.mean_s > 0:
                    # variant with Step 5 overlapped, against the plain original
                    adjusted_savings[s.method] = 1.0 - s.adjusted_mean_s / base.mean_s

    from . import _kernels
    return BenchReport(case_name=case.name, n_nodes=len(case.buses),
                       repetitions=config.repetitions, warmup=config.warmup,
                       kernel_impl=_kernels.get(config.kernels).NAME,
                       scenario=config.scenario, results=results,
                       max_voltage_discrepancy=discrepancy,
                       step4_savings=savings, overall_savings=overall,
                       adjusted_savings=adjusted_savings)


# ---------------------------------------------------------------------------
# Emission

def _fmt_time(seconds: Optional[float]) -> str:
    if seconds is None:
        return "-"
    return f"{seconds * 1e3:.6g} ms"


def _stats_row_dict(report: BenchReport, s: MethodStats) -> dict:
    shares = s.step_shares or {}
    return {
        "case": report.case_name,
        "n_nodes": report.n_nodes,
        "repetitions": report.repetitions,
        "method": s.method,
        "status": s.status,
        "orders_or_iterations": s.orders_or_iterations,
        "mean_s": s.mean_s,
        "median_s": s.median_s,
        "min_s": s.min_s,
        "max_mismatch": s.max_mismatch,
        "share_steps23_pct": shares.get("steps23"),
        "share_step4_pct": shares.get("step4"),
        "share_step5_pct": shares.get("step5"),
        "steps23_mean_s": s.steps23_mean_s,
        "step4_mean_s": s.step4_mean_s,
        "step5_mean_s": s.step5_mean_s,
        "adjusted_mean_s": s.adjusted_mean_s,
        "step4_savings_vs_lu": report.step4_savings.get(s.method),
        "overall_savings_vs_lu": report.overall_savings.get(s.method),
        "adjusted_savings_vs_lu": report.adjusted_savings.get(s.method),
        "prep_events_timed": s.prep_events_timed,
        "max_voltage_discrepancy": report.max_voltage_discrepancy,
    }


def emit_report(report: BenchReport, output: str = "table") -> str:
    if output == "json":
        doc = {
            "case": report.case_name,
            "n_nodes": report.n_nodes,
            "repetitions": report.repetitions,
            "warmup": report.warmup,
            "kernel_impl": report.kernel_impl,
            "scenario": report.scenario,
            "max_voltage_discrepancy": report.max_voltage_discrepancy,
            "step4_savings": report.step4_savings,
            "overall_savings": report.overall_savings,
            "adjusted_savings": report.adjusted_savings,
            "methods": [_stats_row_dict(report, s) for s in report.results],
        }
        return json.dumps(doc, indent=1)
    if output == "csv":
        buf = io.StringIO()
        rows = [_stats_row_dict(report, s) for s in report.results]
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()
    if output != "table":
        raise UsageError(f"unknown output format {output!r}")

    lines = [
        f"case {report.case_name}  nodes {report.n_nodes}  reps {report.repetitions}"
        f"  kernels {report.kernel_impl}"
        + (f"  scenario {report.scenario}" if report.scenario else "")
    ]
    header = (f"{'method':<9} {'status':<19} {'it':>4} {'mean':>13} {'median':>13} "
              f"{'min':>13} {'s23%':>6} {'s4%':>6} {'s5%':>6} {'adj mean':>13}")
    lines.append(header)
    lines.append("-" * len(header))
    for s in report.results:
        shares = s.step_shares or {}
        fmt_pct = lambda v: f"{v:5.1f}" if v is not None else "    -"
        lines.append(
            f"{s.method:<9} {s.status:<19} {s.orders_or_iterations:>4} "
            f"{_fmt_time(s.mean_s):>13} {_fmt_time(s.median_s):>13} "
            f"{_fmt_time(s.min_s):>13} "
            f"{fmt_pct(shares.get('steps23')):>6} {fmt_pct(shares.get('step4')):>6} "
            f"{fmt_pct(shares.get('step5')):>6} {_fmt_time(s.adjusted_mean_s):>13}")
    if report.max_voltage_discrepancy is not None:
        lines.append(f"max |V| discrepancy over converged methods: "
                     f"{report.max_voltage_discrepancy:.3e}")
    for name, frac in report.step4_savings.items():
        lines.append(f"step-4 savings {name} vs helm-lu: {100 * frac:.1f}%"
                     f" (overall {100 * report.overall_savings.get(name, 0):.1f}%)")
    for name, frac in report.adjusted_savings.items():
        lines.append(f"overall savings ({name}, Step 5 overlapped): {100 * frac:.1f}%")
    return "\n".join(lines)


def emit_solve_report(report: SolveReport, output: str = "table") -> str:
    """Render one solver run; json/csv carry >= 10 significant digits."""
    if output == "json":
        doc = {
            "method": report.method,
            "status": report.status,
            "orders_or_iterations": report.orders_or_iterations,
            "max_mismatch": report.max_mismatch,
            "t_total_s": report.timings.t_total,
            "voltages": [
                {"node": nid, "re": v.real, "im": v.imag,
                 "mag": abs(v), "angle_deg": float(np.degrees(np.angle(v)))}
                for nid, v in zip(report.node_ids, report.voltages)
            ],
        }
        return json.dumps(doc, indent=1)
    if output == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["node", "re", "im", "mag", "angle_deg"])
        for nid, v in zip(report.node_ids, report.voltages):
            writer.writerow([nid, repr(float(v.real)), repr(float(v.imag)),
                             repr(float(abs(v))),
                             repr(float(np.degrees(np.angle(v))))])
        return buf.getvalue()
    if output != "table":
        raise UsageError(f"unknown output format {output!r}")
    lines = [
        f"method {report.method}: {report.status} after "
        f"{report.orders_or_iterations} orders/iterations, "
        f"max mismatch {report.max_mismatch:.3e} p.u., "
        f"loop {report.timings.t_total * 1e3:.3f} ms",
        f"{'node':>6} {'|V|':>14} {'angle(deg)':>12}",
    ]
    for nid, v in zip(report.node_ids, report.voltages):
        lines.append(f"{nid:>6} {abs(v):>14.10f} {np.degrees(np.angle(v)):>12.6f}")
    return "\n".join(lines)
