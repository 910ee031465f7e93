"""Load-flow solvers: HELM with three Step-4 backends, plus four baselines.

Every solver is split into a preparation phase (admittance assembly,
factorization, operator/schedule builds) and a ``run`` phase containing
only the iteration/recursion main loop; the benchmark times ``run`` alone.
Solvers consume cases whose scenario scaling has already been applied.
"""

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .continuation import Trend, accel_update, classify_changes, new_accel_state
from .errors import SingularSystemError, TopologyError, UsageError
from .instrumentation import prep_counter
from .netmodel import (AdmittanceSplit, IncidenceStructure, NetworkCase,
                       Topology, assemble_admittance, build_incidence)
from .series_engine import (DEFAULT_MAX_ORDER, build_embedding, germ, advance)

DIVERGENCE_GUARD = 1e6

METHOD_NAMES = ("helm-lu", "s-helm", "d-helm", "bfs", "direct", "zbus", "nr")
HELM_VARIANTS = {"helm-lu": "lu", "s-helm": "sweep", "d-helm": "dlf"}


class Status:
    CONVERGED = "Converged"
    NO_SOLUTION = "NoSolutionDetected"
    INCONCLUSIVE = "Inconclusive"
    DIVERGED = "Diverged"
    ITERATION_LIMIT = "IterationLimit"


@dataclass
class SolveConfig:
    eps: float = 1e-6
    max_order: int = DEFAULT_MAX_ORDER
    max_iterations: int = 200
    mismatch_tol: float = 1e-8
    oscillation_window: int = 5
    dense_dlf_threshold: int = 512
    dlf_storage: str = "auto"       # DLF operator form: auto|dense|factored
    z_mode: str = "matrix"          # direct-method Z handling: matrix|current
    kernels: Optional[str] = None   # kernel implementation override
    clock: callable = time.perf_counter


@dataclass
class StepTimings:
    """Durations in seconds; per-order/iteration lists aligned with the loop."""

    t_steps23: float = 0.0
    t_step4: float = 0.0
    t_step5: float = 0.0
    t_total: float = 0.0
    per_order_steps23: list = field(default_factory=list)
    per_order_step4: list = field(default_factory=list)
    per_order_step5: list = field(default_factory=list)
    per_iteration: list = field(default_factory=list)


@dataclass
class SolveReport:
    status: str
    voltages: np.ndarray            # internal node order, slack first
    node_ids: list
    orders_or_iterations: int
    max_mismatch: float
    timings: StepTimings
    method: str

    @property
    def converged(self) -> bool:
        return self.status == Status.CONVERGED


# ---------------------------------------------------------------------------
# Step-4 backends

class LUBackend:
    """Retained sparse factorization of the reduced series block."""

    variant = "lu"

    def __init__(self, lu):
        self._lu = lu

    def solve_order(self, rhs: np.ndarray) -> np.ndarray:
        return self._lu.solve(rhs)


class SweepBackend:
    """One backward current summation and one forward update per solve."""

    variant = "sweep"

    def __init__(self, schedule, impl):
        self._schedule = schedule
        self._impl = impl

    def solve_order(self, rhs: np.ndarray) -> np.ndarray:
        return self._impl.sweep_solve(self._schedule, rhs)


class DLFBackend:
    """Constant DLF operator (A_pq Y_b A_pq^T)^{-1}.

    Storage forms: the radial BCBV*BIBC path factorization applied in O(N)
    through the spanning tree (one backward and one forward pass over the
    constant structure), an explicit dense inverse, or retained sparse LU
    factors of the reduced incidence system.
    """

    variant = "dlf"

    def __init__(self, storage, impl, reduced, schedule=None, dlf_dense=None, lu=None):
        self.storage = storage
        self._reduced = reduced
        self._dlf = dlf_dense
        self._lu = lu
        if storage == "path":
            self._schedule = schedule
            self._tree_apply = impl.sweep_solve
        elif storage == "dense":
            self._dense_op = impl.make_dense_operator(dlf_dense)
            self._dense_apply = impl.dense_apply

    def solve_order(self, rhs: np.ndarray) -> np.ndarray:
        if self.storage == "path":
            return self._tree_apply(self._schedule, rhs)
        if self.storage == "dense":
            return self._dense_apply(self._dense_op, rhs)
        return self._lu.solve(rhs)

    def dlf_matrix(self) -> np.ndarray:
        if self._dlf is not None:
            return self._dlf
        return np.linalg.inv(self._reduced.toarray())


def _path_matrices(incidence: IncidenceStructure):
    """Sparse BIBC and BCBV of a radial network from its spanning tree.

    Entries follow the oriented-incidence convention: BIBC[b, i] carries
    the branch-b current per unit injection at node i, BCBV[i, b] the
    voltage deviation at i per unit current on branch b.
    """
    node_ids = incidence.node_ids
    pq_index = {nid: k for k, nid in enumerate(node_ids[1:])}
    slack = node_ids[0]
    n = len(pq_index)
    rows_b, cols_b, vals_b = [], [], []
    rows_v, cols_v, vals_v = [], [], []
    for nid, k in pq_index.items():
        j = nid
        while j != slack:
            parent, pos = incidence.parent[j]
            br = incidence.branches[pos]
            sign = 1.0 if br.from_node == parent else -1.0
            rows_b.append(pos)
            cols_b.append(k)
            vals_b.append(-sign)
            rows_v.append(k)
            cols_v.append(pos)
            vals_v.append(-sign * br.series_impedance)
            j = parent
    bibc = sp.csr_matrix((np.asarray(vals_b, dtype=np.complex128), (rows_b, cols_b)),
                         shape=(n, n))
    bcbv = sp.csr_matrix((np.asarray(vals_v, dtype=np.complex128), (rows_v, cols_v)),
                         shape=(n, n))
    return bibc, bcbv


def _splu(matrix, what):
    try:
        lu = spla.splu(matrix.tocsc())
    except RuntimeError as exc:
        raise SingularSystemError(f"{what}: {exc}")
    return lu


def prepare_lu_backend(Y_series_pq) -> LUBackend:
    prep_counter.bump("lu_factorization")
    return LUBackend(_splu(Y_series_pq, "reduced series block"))


def prepare_sweep_backend(incidence: IncidenceStructure, impl=None) -> SweepBackend:
    if incidence.topology is not Topology.RADIAL:
        raise TopologyError("sweep backend requires a radial network")
    kern = _kernels.get(impl)
    prep_counter.bump("sweep_schedule")
    schedule = kern.make_sweep_schedule(incidence.order_fwd,
                                        incidence.parent_idx, incidence.z_in)
    return SweepBackend(schedule, kern)


def prepare_dlf_backend(incidence: IncidenceStructure, Y_b=None,
                        dense_threshold: int = 512, impl=None,
                        storage: str = "auto") -> DLFBackend:
    """Build the constant DLF operator.

    ``storage='auto'`` uses the BCBV*BIBC path factorization for radial
    networks, the explicit dense inverse for meshed networks up to
    ``dense_threshold`` nodes, and retained LU factors above that.
    """
    if Y_b is None:
        Y_b = incidence.branch_admittances()
    kern = _kernels.get(impl)
    reduced = (incidence.A_tilde @ sp.diags(Y_b) @ incidence.A_tilde.T).tocsc()
    n = reduced.shape[0]
    prep_counter.bump("dlf_build")
    radial = incidence.topology is Topology.RADIAL
    if storage in ("auto", "factored"):
        storage = "path" if radial else ("dense" if n <= dense_threshold
                                         and storage == "auto" else "lu")
    if storage == "path":
        if not radial:
            raise TopologyError("the BCBV*BIBC path factorization requires a radial network")
        schedule = kern.make_sweep_schedule(incidence.order_fwd,
                                            incidence.parent_idx, incidence.z_in)
        return DLFBackend("path", kern, reduced, schedule=schedule)
    if storage == "dense":
        try:
            dlf = np.linalg.inv(reduced.toarray())
        except np.linalg.LinAlgError:
            raise SingularSystemError("reduced incidence system is singular")
        if not np.all(np.isfinite(dlf)):
            raise SingularSystemError("reduced incidence system is singular")
        return DLFBackend("dense", kern, reduced, dlf_dense=dlf)
    if storage == "lu":
        return DLFBackend("lu", kern, reduced,
                          lu=_splu(reduced, "reduced incidence system"))
    raise UsageError(f"unknown DLF storage {storage!r}")


def bibc_matrix(incidence: IncidenceStructure) -> np.ndarray:
    """Bus-injection-to-branch-current operator of a radial network.

    Built from the spanning-tree path structure; equals inv(A_pq).
    """
    if incidence.topology is not Topology.RADIAL:
        raise TopologyError("BIBC is defined for radial networks")
    return _path_matrices(incidence)[0].toarray()


def bcbv_matrix(incidence: IncidenceStructure, Y_b=None) -> np.ndarray:
    """Branch-current-to-bus-voltage operator of a radial network.

    Built from the spanning-tree path structure; equals inv(Y_b A_pq^T).
    A custom branch-admittance diagonal falls back to the inverse formula.
    """
    if incidence.topology is not Topology.RADIAL:
        raise TopologyError("BCBV is defined for radial networks")
    if Y_b is not None:
        return np.linalg.inv(sp.diags(Y_b).toarray() @ incidence.A_tilde.T.toarray())
    return _path_matrices(incidence)[1].toarray()


# ---------------------------------------------------------------------------
# Shared case arrays

@dataclass
class _CaseArrays:
    v0: complex
    s_load: np.ndarray          # constant-power loads (consumption)
    i_load: np.ndarray          # constant-current loads, conjugate-stored
    y_sh_pq: np.ndarray         # total shunt per PQ node (incl. Z loads, charging)
    y_full_rows: sp.csr_matrix  # PQ rows of the full Y-bus, all columns
    y_slack: np.ndarray


def _case_arrays(case: NetworkCase, adm: AdmittanceSplit) -> _CaseArrays:
    pq = case.pq_buses()
    return _CaseArrays(
        v0=case.slack_v0,
        s_load=np.array([b.load_P for b in pq], dtype=np.complex128),
        i_load=np.array([b.load_I for b in pq], dtype=np.complex128),
        y_sh_pq=np.asarray(adm.Y_shunt[1:], dtype=np.complex128),
        y_full_rows=adm.Y_full[1:, :].tocsr(),
        y_slack=adm.y_slack_column,
    )


def _pi_injection(arrays: _CaseArrays, V: np.ndarray) -> np.ndarray:
    """Injected currents of the P and I load parts at the given PQ voltages."""
    return -np.conj(arrays.s_load / V) - np.conj(arrays.i_load)


def power_mismatch(arrays: _CaseArrays, V_pq: np.ndarray) -> float:
    """Max |Delta S| of the full ZIP load-flow equations at PQ nodes."""
    with np.errstate(all="ignore"):
        v_all = np.concatenate(([arrays.v0], V_pq))
        residual_i = arrays.y_full_rows @ v_all - _pi_injection(arrays, V_pq)
        ds = np.abs(V_pq * np.conj(residual_i))
    if not np.all(np.isfinite(ds)):
        return float("inf")
    return float(np.max(ds)) if len(ds) else 0.0


# ---------------------------------------------------------------------------
# HELM solvers

class PreparedHelm:
    """HELM solve with preparation done; ``run`` times only the main loop."""

    def __init__(self, case, variant, config):
        if variant not in ("lu", "sweep", "dlf"):
            raise UsageError(f"unknown HELM variant {variant!r}")
        self.case = case
        self.config = config
        self.variant = variant
        self.method = {v: k for k, v in HELM_VARIANTS.items()}[variant]
        self.impl = _kernels.get(config.kernels)
        self.adm = assemble_admittance(case)
        self.arrays = _case_arrays(case, self.adm)
        self.embedding = build_embedding(case, self.adm)
        if variant == "lu":
            self.backend = prepare_lu_backend(self.adm.Y_series_pq)
        else:
            incidence = build_incidence(case)
            if variant == "sweep":
                self.backend = prepare_sweep_backend(incidence, impl=self.impl)
            else:
                self.backend = prepare_dlf_backend(
                    incidence, dense_threshold=config.dense_dlf_threshold,
                    impl=self.impl, storage=config.dlf_storage)

    def run(self) -> SolveReport:
        cfg = self.config
        clock = cfg.clock
        timings = StepTimings()
        t_start = clock()

        state = germ(self.case, cfg.max_order)
        accel = new_accel_state(state.n_nodes, cfg.max_order, impl=self.impl)
        t0 = clock()
        est = accel_update(accel, state.V_coeffs[0])
        timings.t_step5 += clock() - t0
        changes = []
        status = None

        for order in range(1, cfg.max_order + 1):
            advance(state, self.backend, self.embedding, impl=self.impl,
                    timings=timings, clock=clock)
            t0 = clock()
            est = accel_update(accel, state.V_coeffs[order])
            # accel.last_change is max_i |V^(n) - V^(n-1)|, the Step-5 check
            converged = accel.last_change < cfg.eps
            t5 = clock() - t0
            timings.t_step5 += t5
            timings.per_order_step5.append(t5)
            changes.append(accel.last_change)
            if converged:
                # certification is termination logic, outside the step buckets
                if power_mismatch(self.arrays, est) < cfg.mismatch_tol:
                    status = Status.CONVERGED
                    break
            elif not np.all(np.isfinite(est)):
                status = Status.DIVERGED
                break

        if status is None:
            trend = classify_changes(changes, cfg.oscillation_window, cfg.eps)
            status = Status.NO_SOLUTION if trend is Trend.OSCILLATING \
                else Status.INCONCLUSIVE
        timings.t_total = clock() - t_start

        final_est = accel.latest_estimate.copy()
        voltages = np.concatenate(([self.case.slack_v0], final_est))
        return SolveReport(status=status, voltages=voltages,
                           node_ids=self.adm.node_ids,
                           orders_or_iterations=state.n,
                           max_mismatch=power_mismatch(self.arrays, final_est),
                           timings=timings, method=self.method)


def solve_helm(case: NetworkCase, variant: str = "lu",
               config: SolveConfig = None) -> SolveReport:
    """Full HELM solve: germ, recursion with the chosen Step-4 backend,
    rational acceleration at the embedding point, convergence/no-solution
    classification."""
    return PreparedHelm(case, variant, config or SolveConfig()).run()


def helm_coefficients(case: NetworkCase, variant: str, orders: int,
                      config: SolveConfig = None) -> np.ndarray:
    """Coefficient table (orders+1, N) from the given backend, no stopping.

    Exposed for backend-equivalence checks; runs the recursion a fixed
    number of orders regardless of convergence.
    """
    cfg = config or SolveConfig()
    prepared = PreparedHelm(case, variant, cfg)
    state = germ(case, orders)
    for _ in range(orders):
        advance(state, prepared.backend, prepared.embedding, impl=prepared.impl)
    return state.V_coeffs


# ---------------------------------------------------------------------------
# Baseline solvers

class _PreparedIterative:
    """Shared fixed-point loop driver for the baseline methods."""

    method = "base"

    def __init__(self, case: NetworkCase, config: SolveConfig):
        self.case = case
        self.config = config
        self.adm = assemble_admittance(case)
        self.arrays = _case_arrays(case, self.adm)

    def _iterate(self, V: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def run(self) -> SolveReport:
        cfg = self.config
        clock = cfg.clock
        timings = StepTimings()
        t_start = clock()
        n_pq = self.case.n_pq
        V = np.full(n_pq, self.case.slack_v0, dtype=np.complex128)
        status = Status.ITERATION_LIMIT
        iterations = 0
        for iterations in range(1, cfg.max_iterations + 1):
            t0 = clock()
            with np.errstate(all="ignore"):
                V_new = self._iterate(V)
            timings.per_iteration.append(clock() - t0)
            if not np.all(np.isfinite(V_new)) or np.max(np.abs(V_new)) > DIVERGENCE_GUARD:
                status = Status.DIVERGED
                V = V_new
                break
            change = float(np.max(np.abs(V_new - V)))
            V = V_new
            if change < cfg.eps:
                mismatch = power_mismatch(self.arrays, V)
                if mismatch < cfg.mismatch_tol:
                    status = Status.CONVERGED
                    break
        timings.t_total = clock() - t_start
        voltages = np.concatenate(([self.case.slack_v0], V))
        return SolveReport(status=status, voltages=voltages,
                           node_ids=self.adm.node_ids,
                           orders_or_iterations=iterations,
                           max_mismatch=power_mismatch(self.arrays, V),
                           timings=timings, method=self.method)


class PreparedBfs(_PreparedIterative):
    """Backward-forward sweep; shunt and Z parts ride in the currents."""

    method = "bfs"

    def __init__(self, case, config):
        super().__init__(case, config)
        incidence = build_incidence(case)
        if incidence.topology is not Topology.RADIAL:
            raise TopologyError("backward-forward sweep requires a radial network")
        kern = _kernels.get(config.kernels)
        prep_counter.bump("sweep_schedule")
        self._schedule = kern.make_sweep_schedule(
            incidence.order_fwd, incidence.parent_idx, incidence.z_in)
        self._kern = kern

    def _iterate(self, V):
        inj = _pi_injection(self.arrays, V) - self.arrays.y_sh_pq * V
        return self.case.slack_v0 + self._kern.sweep_solve(self._schedule, inj)


class PreparedDirect(_PreparedIterative):
    """Direct approach: one constant-operator matvec per iteration.

    ``z_mode='matrix'`` folds shunts and Z loads into the constant operator
    (robust under heavy impedance loading); ``'current'`` keeps the textbook
    V0 + DLF @ I(V) form with shunts in the currents.
    """

    method = "direct"

    def __init__(self, case, config):
        super().__init__(case, config)
        incidence = build_incidence(case)
        y_b = incidence.branch_admittances()
        reduced = (incidence.A_tilde @ sp.diags(y_b) @ incidence.A_tilde.T).tocsc()
        self._z_mode = config.z_mode
        prep_counter.bump("dlf_build")
        if config.z_mode == "matrix":
            operator = reduced + sp.diags(self.arrays.y_sh_pq)
        elif config.z_mode == "current":
            operator = reduced
        else:
            raise UsageError(f"unknown z_mode {config.z_mode!r}")
        n = operator.shape[0]
        kern = _kernels.get(config.kernels)
        if n <= config.dense_dlf_threshold:
            try:
                dlf = np.linalg.inv(operator.toarray())
            except np.linalg.LinAlgError:
                raise SingularSystemError("direct-approach operator is singular")
            self._op = kern.make_dense_operator(dlf)
            self._dense_apply = kern.dense_apply
            self._lu = None
        else:
            self._op = None
            self._lu = _splu(operator, "direct-approach operator")
        if config.z_mode == "current":
            # textbook form: V = V0*1 + DLF @ I(V)
            self._offset = np.full(n, case.slack_v0, dtype=np.complex128)
        else:
            self._offset = self._apply(-self.arrays.y_slack * case.slack_v0)

    def _apply(self, x):
        if self._op is not None:
            return self._dense_apply(self._op, x)
        return self._lu.solve(x)

    def _iterate(self, V):
        if self._z_mode == "matrix":
            inj = _pi_injection(self.arrays, V)
        else:
            inj = _pi_injection(self.arrays, V) - self.arrays.y_sh_pq * V
        return self._offset + self._apply(inj)


class PreparedImplicitZ(_PreparedIterative):
    """One factorization of the full-Y PQ block, reused every iteration."""

    method = "zbus"

    def __init__(self, case, config):
        super().__init__(case, config)
        prep_counter.bump("zbus_factorization")
        self._lu = _splu(self.adm.Y_full[1:, 1:].tocsc(), "full-Y PQ block")

    def _iterate(self, V):
        rhs = _pi_injection(self.arrays, V) - self.arrays.y_slack * self.case.slack_v0
        return self._lu.solve(rhs)


class PreparedNewton:
    """Polar Newton-Raphson on PQ mismatches, full Jacobian per iteration.

    ZIP loads are evaluated at the present voltages and treated as constant
    within each Jacobian solve; no damping or line search.
    """

    method = "nr"

    def __init__(self, case: NetworkCase, config: SolveConfig):
        self.case = case
        self.config = config
        self.adm = assemble_admittance(case)
        self.arrays = _case_arrays(case, self.adm)
        prep_counter.bump("nr_ybus_dense")
        self._Y = self.adm.Y_full.toarray()

    def _spec_power(self, V_pq):
        return -self.arrays.s_load - V_pq * self.arrays.i_load

    def run(self) -> SolveReport:
        cfg = self.config
        clock = cfg.clock
        timings = StepTimings()
        t_start = clock()
        n = self.case.n_pq
        Y = self._Y
        v0 = self.case.slack_v0
        theta = np.full(n + 1, np.angle(v0))
        vm = np.full(n + 1, abs(v0))
        status = Status.ITERATION_LIMIT
        iterations = 0
        growth_streak = 0
        prev_norm = np.inf
        V_all = vm * np.exp(1j * theta)

        for iterations in range(1, cfg.max_iterations + 1):
            t0 = clock()
            with np.errstate(all="ignore"):
                V_all = vm * np.exp(1j * theta)
                Ibus = Y @ V_all
                s_calc = V_all * np.conj(Ibus)
                ds = self._spec_power(V_all[1:]) - s_calc[1:]
                fvec = np.concatenate((ds.real, ds.imag))
                fnorm = float(np.max(np.abs(fvec))) if len(fvec) else 0.0
                if not np.isfinite(fnorm):
                    status = Status.DIVERGED
                    timings.per_iteration.append(clock() - t0)
                    break
                growth_streak = growth_streak + 1 if fnorm > prev_norm else 0
                if growth_streak >= 3:
                    status = Status.DIVERGED
                    timings.per_iteration.append(clock() - t0)
                    break
                prev_norm = fnorm

                # complex power flow derivatives wrt angle and magnitude
                diag_v = np.diag(V_all)
                diag_i = np.diag(Ibus)
                diag_e = np.diag(V_all / np.abs(V_all))
                ds_dvm = diag_e @ np.conj(diag_i) + diag_v @ np.conj(Y @ diag_e)
                ds_dth = 1j * diag_v @ np.conj(diag_i - Y @ diag_v)
                J = np.block([
                    [ds_dth[1:, 1:].real, ds_dvm[1:, 1:].real],
                    [ds_dth[1:, 1:].imag, ds_dvm[1:, 1:].imag],
                ])
                try:
                    step = np.linalg.solve(J, fvec)
                except np.linalg.LinAlgError:
                    status = Status.DIVERGED
                    timings.per_iteration.append(clock() - t0)
                    break
                theta[1:] += step[:n]
                vm[1:] += step[n:]
                V_new = vm * np.exp(1j * theta)
                change = float(np.max(np.abs(V_new - V_all)))
                V_all = V_new
            timings.per_iteration.append(clock() - t0)
            if not np.all(np.isfinite(V_all)) or np.max(np.abs(V_all)) > DIVERGENCE_GUARD:
                status = Status.DIVERGED
                break
            if change < cfg.eps:
                mismatch = power_mismatch(self.arrays, V_all[1:])
                if mismatch < cfg.mismatch_tol:
                    status = Status.CONVERGED
                    break
        timings.t_total = clock() - t_start
        return SolveReport(status=status, voltages=V_all.copy(),
                           node_ids=self.adm.node_ids,
                           orders_or_iterations=iterations,
                           max_mismatch=power_mismatch(self.arrays, V_all[1:]),
                           timings=timings, method=self.method)


# ---------------------------------------------------------------------------
# Dispatch

def prepare_method(case: NetworkCase, method: str, config: SolveConfig = None):
    """Build the prepared solver for a method name; ``run()`` is the timed part."""
    config = config or SolveConfig()
    if method in HELM_VARIANTS:
        return PreparedHelm(case, HELM_VARIANTS[method], config)
    if method == "bfs":
        return PreparedBfs(case, config)
    if method == "direct":
        return PreparedDirect(case, config)
    if method == "zbus":
        return PreparedImplicitZ(case, config)
    if method == "nr":
        return PreparedNewton(case, config)
    raise UsageError(f"unknown method {method!r}; expected one of {METHOD_NAMES}")


def solve_bfs(case, config=None):
    return PreparedBfs(case, config or SolveConfig()).run()


def solve_direct(case, config=None):
    return PreparedDirect(case, config or SolveConfig()).run()


def solve_implicit_z(case, config=None):
    return PreparedImplicitZ(case, config or SolveConfig()).run()


def solve_newton_raphson(case, config=None):
    return PreparedNewton(case, config or SolveConfig()).run()


def solve(case: NetworkCase, method: str, config: SolveConfig = None) -> SolveReport:
    return prepare_method(case, method, config).run()
