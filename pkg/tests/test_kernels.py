"""Parity between the pure numpy kernels and the compiled core."""

import numpy as np
import pytest

from radialhelm import _kernels
from radialhelm.errors import UsageError

needs_compiled = pytest.mark.skipif("compiled" not in _kernels.available(),
                                    reason="compiled kernels not built")


def impls():
    return [_kernels.get(n) for n in _kernels.available()]


def random_series(rng, orders, nodes):
    decay = 0.5 ** np.arange(orders)[:, None]
    return (rng.standard_normal((orders, nodes))
            + 1j * rng.standard_normal((orders, nodes))) * decay


class TestSelection:
    def test_available_contains_pure(self):
        assert "pure" in _kernels.available()

    def test_explicit_names(self):
        assert _kernels.get("pure").NAME == "pure"
        with pytest.raises(UsageError):
            _kernels.get("fancy")

    def test_module_passthrough(self):
        mod = _kernels.get("pure")
        assert _kernels.get(mod) is mod

    @needs_compiled
    def test_auto_prefers_compiled(self, monkeypatch):
        monkeypatch.delenv("RADIAL_HELM_KERNELS", raising=False)
        assert _kernels.get().NAME == "compiled"
        monkeypatch.setenv("RADIAL_HELM_KERNELS", "pure")
        assert _kernels.get().NAME == "pure"


@needs_compiled
class TestParity:
    def test_reciprocal(self):
        rng = np.random.default_rng(42)
        V = random_series(rng, 12, 17)
        V[0] = 1.0 + 0.05j
        tables = []
        for impl in impls():
            W = np.zeros_like(V)
            for n in range(12):
                impl.reciprocal_update(V, W, n)
            tables.append(W)
        np.testing.assert_allclose(tables[0], tables[1], rtol=1e-12, atol=1e-14)

    def test_sweep(self):
        rng = np.random.default_rng(7)
        # random tree over 25 nodes
        n = 25
        parent = np.full(n, -1, dtype=np.int32)
        order = np.arange(n, dtype=np.int32)
        z = rng.uniform(0.01, 0.1, n) + 1j * rng.uniform(0.005, 0.05, n)
        for i in range(1, n):
            parent[i] = rng.integers(-1, i)
        rhs = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        outs = []
        for impl in impls():
            schedule = impl.make_sweep_schedule(order, parent, z)
            outs.append(impl.sweep_solve(schedule, rhs))
        np.testing.assert_allclose(outs[0], outs[1], rtol=1e-13, atol=1e-15)

    def test_dense_apply(self):
        rng = np.random.default_rng(3)
        for n in (5, 40, 130):
            A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            outs = [impl.dense_apply(impl.make_dense_operator(A), x)
                    for impl in impls()]
            np.testing.assert_allclose(outs[0], outs[1], rtol=1e-12,
                                       atol=1e-12 * np.abs(outs[0]).max())

    def test_accelerator(self):
        rng = np.random.default_rng(11)
        coeffs = random_series(rng, 14, 9)
        accs = [impl.EpsilonAccelerator(9, 16) for impl in impls()]
        for k in range(14):
            row = np.ascontiguousarray(coeffs[k])
            changes = [acc.update(row) for acc in accs]
            assert changes[0] == pytest.approx(changes[1], rel=1e-10, abs=1e-13)
            np.testing.assert_allclose(accs[0].latest(), accs[1].latest(),
                                       rtol=1e-10, atol=1e-13)

    def test_accelerator_degenerate_freeze(self):
        # constant partial sums freeze the estimate in both implementations
        for impl in impls():
            acc = impl.EpsilonAccelerator(3, 10)
            germ = np.array([1 + 0j, 0.9 - 0.1j, 1.1 + 0.2j])
            acc.update(germ.copy())
            for _ in range(5):
                acc.update(np.zeros(3, complex))
                np.testing.assert_array_equal(acc.latest(), germ)

    def test_solver_results_identical_modulo_rounding(self):
        from conftest import make_two_bus
        from radialhelm import SolveConfig, solve_helm
        reps = {name: solve_helm(make_two_bus(), "sweep",
                                 SolveConfig(kernels=name))
                for name in _kernels.available()}
        va = reps["pure"].voltages
        vb = reps["compiled"].voltages
        assert np.abs(va - vb).max() < 1e-12
