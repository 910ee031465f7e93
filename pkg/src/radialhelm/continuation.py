"""Series evaluation at the target point by rational acceleration.

The per-step estimator advances an epsilon-style acceleration table whose
even columns equal diagonal Pade evaluations of the partial-sum sequence,
so consuming n+1 coefficients yields the [ceil(n/2)/floor(n/2)] value at
the embedding point. The explicit Pade matrix method is provided for
cross-validation and API completeness; it is not on the default solve path.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .errors import IllConditionedError, UsageError

DEFAULT_EPS = 1e-6
DEFAULT_WINDOW = 5

# matrix method: refuse denominators beyond this condition estimate
COND_LIMIT = 1e13


@dataclass
class AccelState:
    """Acceleration table and running estimates for one solve (all nodes).

    Estimate buffers are reused in a ping-pong fashion: callers that keep
    an estimate across updates must copy it.
    """

    table: np.ndarray               # (nodes, slots) epsilon anti-diagonal
    partial_sums: np.ndarray        # (slots, nodes), filled through `count`-1
    latest_estimate: np.ndarray
    previous_estimate: np.ndarray
    degenerate: np.ndarray          # uint8 flags from the last update
    count: int = 0                  # partial sums consumed so far
    last_change: float = 0.0        # max |latest - previous| of the last update

    @property
    def order(self) -> int:
        return self.count - 1


def new_accel_state(n_nodes: int, max_order: int, impl=None) -> AccelState:
    acc = _kernels.get(impl).EpsilonAccelerator(n_nodes, max_order + 2)
    state = AccelState(table=acc.table_arr, partial_sums=acc.sums_arr,
                       latest_estimate=acc.est_arr[0],
                       previous_estimate=acc.est_arr[0],
                       degenerate=acc.degen_arr)
    state._acc = acc
    state._rows = (acc.est_arr[0], acc.est_arr[1])
    return state


def accel_update(accel: AccelState, new_coefficient: np.ndarray) -> np.ndarray:
    """Consume the next series coefficient (all nodes) and return estimates.

    Nodes whose table recursion hits the small-denominator guard keep their
    previous estimate for this step (flagged in ``accel.degenerate``).
    The returned estimate buffer is reused every other update; copy it to
    keep it across calls.
    """
    acc = accel._acc
    coeff = np.ascontiguousarray(new_coefficient, dtype=np.complex128)
    accel.last_change = acc.update(coeff)
    count = acc.count
    accel.count = count
    accel.latest_estimate = accel._rows[count % 2]
    accel.previous_estimate = accel._rows[(count - 1) % 2] if count > 1 else accel._rows[0]
    return accel.latest_estimate


@dataclass
class RationalApproximant:
    """[L/M] rational function with denominator constant term 1."""

    numerator_coeffs: np.ndarray    # zeta[0..L]
    denominator_coeffs: np.ndarray  # beta[1..M]
    L: int
    M: int

    def __call__(self, alpha: complex) -> complex:
        num = sum(z * alpha ** k for k, z in enumerate(self.numerator_coeffs))
        den = 1.0 + sum(b * alpha ** (k + 1)
                        for k, b in enumerate(self.denominator_coeffs))
        return num / den

    def maclaurin(self, order: int) -> np.ndarray:
        """Re-expand the rational as a power series through ``order``."""
        out = np.zeros(order + 1, dtype=np.complex128)
        zeta = self.numerator_coeffs
        beta = self.denominator_coeffs
        for j in range(order + 1):
            val = zeta[j] if j <= self.L else 0.0
            for m in range(1, min(j, self.M) + 1):
                val = val - beta[m - 1] * out[j - m]
            out[j] = val
        return out


def pade_matrix_method(coeffs, L: int, M: int) -> RationalApproximant:
    """Fit the [L/M] approximant by the linear (Toeplitz) matrix method."""
    c = np.asarray(coeffs, dtype=np.complex128)
    if len(c) < L + M + 1:
        raise UsageError(f"[{L}/{M}] needs {L + M + 1} coefficients, got {len(c)}")

    def cat(k):
        return c[k] if k >= 0 else 0.0

    if M == 0:
        beta = np.zeros(0, dtype=np.complex128)
    else:
        A = np.empty((M, M), dtype=np.complex128)
        b = np.empty(M, dtype=np.complex128)
        for k in range(1, M + 1):
            for m in range(1, M + 1):
                A[k - 1, m - 1] = cat(L + k - m)
            b[k - 1] = -c[L + k]
        try:
            cond = np.linalg.cond(A)
        except np.linalg.LinAlgError:
            cond = np.inf
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise IllConditionedError("Pade denominator system is ill-conditioned",
                                      condition=float(cond))
        try:
            beta = np.linalg.solve(A, b)
        except np.linalg.LinAlgError:
            raise IllConditionedError("Pade denominator system is singular",
                                      condition=float(cond))
    zeta = np.empty(L + 1, dtype=np.complex128)
    for j in range(L + 1):
        val = c[j]
        for m in range(1, min(j, M) + 1):
            val = val + beta[m - 1] * c[j - m]
        zeta[j] = val
    return RationalApproximant(numerator_coeffs=zeta, denominator_coeffs=beta,
                               L=L, M=M)


def check_convergence(estimates_now, estimates_prev, eps: float) -> bool:
    """True iff the maximum nodal estimate change is below eps."""
    now = np.asarray(estimates_now)
    prev = np.asarray(estimates_prev)
    if now.shape != prev.shape:
        raise UsageError("estimate vectors must have equal length")
    return bool(np.max(np.abs(now - prev)) < eps)


class Trend(Enum):
    CONVERGING = "converging"
    OSCILLATING = "oscillating"
    UNDETERMINED = "undetermined"


def classify_changes(changes, window: int = DEFAULT_WINDOW,
                     eps: float = DEFAULT_EPS) -> Trend:
    """Trend of a per-step maximum-change sequence over its trailing window."""
    if not changes:
        return Trend.UNDETERMINED
    d = list(changes)[-window:]
    if all(d[i + 1] < d[i] for i in range(len(d) - 1)):
        return Trend.CONVERGING
    if all(x > eps for x in d):
        return Trend.OSCILLATING
    return Trend.UNDETERMINED


def detect_nonexistence(history, window: int = DEFAULT_WINDOW,
                        eps: float = DEFAULT_EPS) -> Trend:
    """Classify the estimate sequence over the trailing window.

    Oscillating: step changes stay above eps with no strict contraction
    over the window (the non-existence signature). Converging: strictly
    shrinking changes. Anything else is undetermined.
    """
    if len(history) < 2:
        raise UsageError("need at least two estimate vectors")
    changes = [float(np.max(np.abs(np.asarray(history[i]) - np.asarray(history[i - 1]))))
               for i in range(1, len(history))]
    return classify_changes(changes, window, eps)
