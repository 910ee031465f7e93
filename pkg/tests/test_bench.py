import json

import numpy as np
import pytest

from radialhelm import (BenchConfig, SolveReport, Status, StepTimings,
                        compare_voltages, emit_report, parallel_step5_projection,
                        run_benchmark)
from radialhelm.errors import (InsufficientResultsError, TopologyError,
                               UsageError)
from radialhelm.instrumentation import prep_counter

from conftest import load_with_scenario


class FakeClock:
    """Deterministic clock advancing a fixed tick per reading."""

    def __init__(self, tick=1e-3):
        self.now = 0.0
        self.tick = tick

    def __call__(self):
        self.now += self.tick
        return self.now


def small_config(**kwargs):
    defaults = dict(methods=["helm-lu", "s-helm", "d-helm", "bfs"],
                    repetitions=3, warmup=1)
    defaults.update(kwargs)
    return BenchConfig(**defaults)


class TestRunBenchmark:
    def test_single_repetition_report(self, bundled):
        report = run_benchmark(bundled["case18"], small_config(repetitions=1))
        assert [s.method for s in report.results] == ["helm-lu", "s-helm",
                                                      "d-helm", "bfs"]
        for s in report.results:
            assert s.status == Status.CONVERGED
            assert s.mean_s == s.median_s == s.min_s
            if s.method.endswith("helm") or s.method == "helm-lu":
                assert s.step_shares is not None

    def test_step_shares_sum_to_hundred(self, bundled):
        report = run_benchmark(bundled["case33"], small_config())
        for s in report.results:
            if s.step_shares:
                assert sum(s.step_shares.values()) == pytest.approx(100.0, abs=1.0)

    def test_no_preparation_inside_timed_region(self, bundled):
        report = run_benchmark(bundled["case33"],
                               small_config(methods=["helm-lu", "d-helm", "zbus"]))
        for s in report.results:
            assert s.prep_events_timed == 0

    def test_preparation_counted_outside(self, bundled):
        before = prep_counter.total()
        run_benchmark(bundled["case18"], small_config(methods=["helm-lu"]))
        assert prep_counter.total() > before

    def test_deterministic_with_injected_clock(self, bundled):
        means = []
        for _ in range(2):
            cfg = small_config(methods=["helm-lu", "bfs"], clock=FakeClock())
            report = run_benchmark(bundled["case18"], cfg)
            means.append([(s.mean_s, s.median_s, s.min_s) for s in report.results])
        assert means[0] == means[1]

    def test_method_topology_mismatch(self):
        meshed = load_with_scenario("case33", "33w")
        with pytest.raises(TopologyError) as err:
            run_benchmark(meshed, small_config())
        assert "bfs" in str(err.value) and "s-helm" in str(err.value)

    def test_discrepancy_over_converged(self, bundled):
        report = run_benchmark(bundled["case18"], small_config())
        assert report.max_voltage_discrepancy < 1e-6

    def test_savings_fields(self, bundled):
        report = run_benchmark(bundled["case33"],
                               small_config(parallel_step5_analysis=True,
                                            repetitions=5))
        assert set(report.step4_savings) == {"s-helm", "d-helm"}
        for s in report.results:
            if s.method in ("s-helm", "d-helm", "helm-lu"):
                assert s.adjusted_mean_s is not None
                assert s.adjusted_mean_s <= s.mean_s + 1e-12

    def test_adjusted_savings_exceed_unadjusted(self, bundled):
        report = run_benchmark(bundled["case69"],
                               small_config(methods=["helm-lu", "s-helm", "d-helm"],
                                            parallel_step5_analysis=True,
                                            repetitions=200, warmup=20))
        for m in ("s-helm", "d-helm"):
            assert report.adjusted_savings[m] >= report.overall_savings[m]

    def test_step_components_bounded_by_total(self, bundled):
        report = run_benchmark(bundled["case33"],
                               small_config(methods=["helm-lu"]))
        t = report.results[0].report.timings
        assert t.t_steps23 + t.t_step4 + t.t_step5 <= t.t_total


class TestBenchConfigValidation:
    def test_empty_methods(self):
        with pytest.raises(UsageError):
            BenchConfig(methods=[]).validate()

    def test_unknown_method(self):
        with pytest.raises(UsageError):
            BenchConfig(methods=["simplex"]).validate()

    def test_bad_reps_eps_output(self):
        with pytest.raises(UsageError):
            BenchConfig(methods=["bfs"], repetitions=0).validate()
        with pytest.raises(UsageError):
            BenchConfig(methods=["bfs"], eps=0.0).validate()
        with pytest.raises(UsageError):
            BenchConfig(methods=["bfs"], output="yaml").validate()


class TestParallelStep5Projection:
    def test_zero_step5_is_identity(self):
        t = StepTimings(t_total=10.0,
                        per_order_steps23=[1.0] * 4, per_order_step4=[1.0] * 4,
                        per_order_step5=[0.0] * 4)
        assert parallel_step5_projection(t) == pytest.approx(10.0)

    def test_synthetic_overlap(self):
        # 5 orders of (1, 1, 10): step 5 hides under the next order's 2 units,
        # leaving 8 exposed per overlapped order and the final one whole
        t = StepTimings(t_total=60.0,
                        per_order_steps23=[1.0] * 5, per_order_step4=[1.0] * 5,
                        per_order_step5=[10.0] * 5)
        assert parallel_step5_projection(t) == pytest.approx(60.0 - 4 * 2.0)

    def test_fully_hidden(self):
        t = StepTimings(t_total=12.0,
                        per_order_steps23=[2.0] * 3, per_order_step4=[1.0] * 3,
                        per_order_step5=[1.0] * 3)
        assert parallel_step5_projection(t) == pytest.approx(12.0 - 2.0)


class TestCompareVoltages:
    def make_report(self, mags, status=Status.CONVERGED):
        v = np.asarray(mags, dtype=complex)
        return SolveReport(status=status, voltages=v, node_ids=list(range(len(v))),
                           orders_or_iterations=1, max_mismatch=0.0,
                           timings=StepTimings(), method="x")

    def test_identical_reports(self):
        reports = [self.make_report([1.0, 0.95]) for _ in range(3)]
        assert compare_voltages(reports) == 0.0

    def test_diverged_excluded(self):
        reports = [self.make_report([1.0, 0.95]),
                   self.make_report([1.0, 0.95 + 1e-7]),
                   self.make_report([50.0, 40.0], status=Status.DIVERGED)]
        assert compare_voltages(reports) == pytest.approx(1e-7, rel=1e-3)

    def test_insufficient(self):
        reports = [self.make_report([1.0]),
                   self.make_report([9.9], status=Status.DIVERGED)]
        with pytest.raises(InsufficientResultsError):
            compare_voltages(reports)


class TestEmitReport:
    def test_table_has_row_per_method(self, bundled):
        report = run_benchmark(bundled["case18"], small_config())
        text = emit_report(report, "table")
        for m in ("helm-lu", "s-helm", "d-helm", "bfs"):
            assert any(line.startswith(m) for line in text.splitlines())

    def test_json_round_trips(self, bundled):
        report = run_benchmark(bundled["case18"], small_config())
        doc = json.loads(emit_report(report, "json"))
        assert doc["case"] == "case18"
        assert len(doc["methods"]) == 4
        by_name = {m["method"]: m for m in doc["methods"]}
        assert by_name["helm-lu"]["mean_s"] == report.results[0].mean_s

    def test_csv_parses(self, bundled):
        import csv as csvmod
        import io
        report = run_benchmark(bundled["case18"], small_config())
        rows = list(csvmod.DictReader(io.StringIO(emit_report(report, "csv"))))
        assert len(rows) == 4
        assert float(rows[0]["mean_s"]) == report.results[0].mean_s

    def test_unknown_format(self, bundled):
        report = run_benchmark(bundled["case18"], small_config(repetitions=1))
        with pytest.raises(UsageError):
            emit_report(report, "xml")
