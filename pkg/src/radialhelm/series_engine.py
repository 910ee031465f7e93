"""Voltage power-series generation: germ, reciprocal series, recursion RHS.

Coefficient tables are (order, node) complex arrays over the PQ nodes in
internal order. The slack contributes only to order 0; its higher-order
coefficients are identically zero, which is why the recursion solves the
reduced series block only.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InvalidCaseError, NumericDomainError
from .netmodel import AdmittanceSplit, NetworkCase

DEFAULT_MAX_ORDER = 60


@dataclass
class EmbeddingData:
    """Per-PQ-node load data as it enters the recursion (injection-signed).

    ``S_power`` and ``I_const`` are the injected constant power/current
    (negated loads); ``y_shunt`` collects every shunt admittance seen by
    the embedding: bus shunts, line charging and constant-impedance loads.
    """

    S_power: np.ndarray
    I_const: np.ndarray
    y_shunt: np.ndarray


def build_embedding(case: NetworkCase, admittance: AdmittanceSplit) -> EmbeddingData:
    pq = case.pq_buses()
    s_power = -np.array([b.load_P for b in pq], dtype=np.complex128)
    i_const = -np.array([b.load_I for b in pq], dtype=np.complex128)
    emb = EmbeddingData(S_power=s_power, I_const=i_const,
                        y_shunt=np.array(admittance.Y_shunt[1:],
                                         dtype=np.complex128))
    emb._s_conj = np.conj(s_power)
    emb._i_conj = np.conj(i_const)
    return emb


@dataclass
class SeriesState:
    """Coefficient tables v[n], w[n] filled through order ``n``."""

    n: int
    V_coeffs: np.ndarray
    W_coeffs: np.ndarray
    rhs: np.ndarray = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.V_coeffs.shape[1]


def germ(case: NetworkCase, max_order: int = DEFAULT_MAX_ORDER) -> SeriesState:
    """Order-0 state: v[0] = V0 and w[0] = 1/V0 at every PQ node."""
    if case.slack_v0 == 0:
        raise InvalidCaseError("slack voltage V0 must be nonzero")
    n_pq = case.n_pq
    V = np.zeros((max_order + 1, n_pq), dtype=np.complex128)
    W = np.zeros((max_order + 1, n_pq), dtype=np.complex128)
    V[0] = case.slack_v0
    W[0] = 1.0 / case.slack_v0
    return SeriesState(n=0, V_coeffs=V, W_coeffs=W)


def reciprocal_step(state: SeriesState, impl=None):
    """Fill w[n] at the state's current order from the convolution identity."""
    if state.n <= 1 and np.any(state.V_coeffs[0] == 0):
        raise NumericDomainError("reciprocal series undefined for v[0] = 0")
    _kernels.get(impl).reciprocal_update(state.V_coeffs, state.W_coeffs, state.n)


def assemble_rhs(state: SeriesState, embedding: EmbeddingData) -> np.ndarray:
    """Right-hand side for order n+1 from the order-n tables.

    The constant-current part is linear in the embedding parameter, so it
    contributes only at order 1.
    """
    n_next = state.n + 1
    s_conj = getattr(embedding, "_s_conj", None)
    if s_conj is None:
        s_conj = np.conj(embedding.S_power)
    rhs = s_conj * np.conj(state.W_coeffs[n_next - 1]) \
        - embedding.y_shunt * state.V_coeffs[n_next - 1]
    if n_next == 1:
        rhs = rhs + np.conj(embedding.I_const)
    state.rhs = rhs
    return rhs


def advance(state: SeriesState, backend, embedding: EmbeddingData,
            impl=None, timings=None, clock=None) -> SeriesState:
    """Run one recursion turn: reciprocal, RHS, backend solve for v[n+1].

    With ``timings``/``clock`` given, accumulates the reciprocal+RHS time
    and the backend-solve time into ``timings.t_steps23``/``t_step4``.
    """
    if state.n + 1 >= state.V_coeffs.shape[0]:
        raise ValueError("series order budget exhausted; enlarge max_order")
    timed = timings is not None and clock is not None
    t0 = clock() if timed else 0.0
    if state.n >= 1:
        reciprocal_step(state, impl=impl)
    rhs = assemble_rhs(state, embedding)
    t1 = clock() if timed else 0.0
    v_next = backend.solve_order(rhs)
    if timed:
        t2 = clock()
        timings.t_steps23 += t1 - t0
        timings.t_step4 += t2 - t1
        timings.per_order_steps23.append(t1 - t0)
        timings.per_order_step4.append(t2 - t1)
    state.V_coeffs[state.n + 1] = v_next
    state.n += 1
    return state
