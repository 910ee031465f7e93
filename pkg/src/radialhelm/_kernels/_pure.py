"""Pure numpy implementations of the per-order hot kernels.

Selected automatically when the compiled extension is unavailable; also
selectable explicitly for benchmarking against the compiled core. All
functions share signatures and semantics with ``_core``.
"""

import numpy as np

NAME = "pure"

# Epsilon-table hygiene constants (shared with the compiled core).
EPS_TINY_REL = 1e-13
EPS_HUGE = 1e30


def reciprocal_update(V, W, n):
    """Fill W[n] from V[0..n] and W[0..n-1] by series reciprocal recursion.

    V and W are (orders, nodes) complex arrays. Row 0 of W must hold 1/V[0]
    before any call with n >= 1.
    """
    if n == 0:
        W[0] = 1.0 / V[0]
        return
    acc = np.einsum("kn,kn->n", W[:n], V[n:0:-1])
    W[n] = -acc / V[0]


def make_sweep_schedule(order_fwd, parent_idx, z_in):
    # Python lists beat numpy scalar indexing in the interpreted loops.
    return (
        [int(i) for i in order_fwd],
        [int(p) for p in parent_idx],
        [complex(z) for z in z_in],
    )


def sweep_solve(schedule, rhs):
    """One backward current summation plus one forward update on the tree.

    Solves A_pq @ i_b = rhs, then Y_b A_pq^T x = i_b with zero voltage at
    the root, i.e. x = (A_pq Y_b A_pq^T)^{-1} rhs for the spanning tree.
    """
    order, parent, z = schedule
    flow = [-c for c in rhs.tolist()]
    for i in reversed(order):
        p = parent[i]
        if p >= 0:
            flow[p] += flow[i]
    x = [0j] * len(order)
    for i in order:
        p = parent[i]
        xp = x[p] if p >= 0 else 0j
        x[i] = xp - z[i] * flow[i]
    return np.asarray(x, dtype=np.complex128)


def make_dense_operator(A):
    """Precompute the layout dense_apply wants; the BLAS path keeps A as is."""
    return np.ascontiguousarray(A, dtype=np.complex128)


def dense_apply(operator, x):
    """Complex matrix-vector product."""
    return operator @ x


class EpsilonAccelerator:
    """Per-solve epsilon-table state; same contract as the compiled twin.

    ``update`` folds the next coefficient into the running partial sums,
    advances the table one anti-diagonal, applies the small-denominator
    guard (degenerate nodes keep their previous estimate), and returns
    max |latest - previous|.
    """

    def __init__(self, n_nodes, slots):
        self.table_arr = np.zeros((n_nodes, slots), dtype=np.complex128)
        self.sums_arr = np.zeros((slots, n_nodes), dtype=np.complex128)
        self.est_arr = np.zeros((2, n_nodes), dtype=np.complex128)
        self.degen_arr = np.zeros(n_nodes, dtype=np.uint8)
        self.count = 0

    def latest(self):
        return self.est_arr[self.count % 2] if self.count else self.est_arr[0]

    def previous(self):
        return self.est_arr[(self.count - 1) % 2] if self.count > 1 else self.est_arr[0]

    def update(self, coeff):
        n = self.count
        if n >= self.sums_arr.shape[0]:
            raise ValueError("acceleration table is full; enlarge max_order")
        E = self.table_arr
        sums = self.sums_arr
        degen = self.degen_arr
        prev = self.est_arr[(n % 2) if n else 0]
        out = self.est_arr[(n + 1) % 2]
        snew = sums[n]
        if n == 0:
            snew[:] = coeff
        else:
            np.add(sums[n - 1], coeff, out=snew)
        E[:, n] = snew
        degen[:] = 0
        if n == 0:
            out[:] = snew
        else:
            aux2 = np.zeros(E.shape[0], dtype=np.complex128)
            for j in range(n, 0, -1):
                aux1 = aux2
                aux2 = E[:, j - 1].copy()
                diff = E[:, j] - aux2
                bad = np.abs(diff) < EPS_TINY_REL * (1.0 + np.abs(E[:, j]))
                degen[bad] = 1
                np.copyto(diff, 1.0, where=bad)
                E[:, j - 1] = aux1 + 1.0 / diff
                E[bad, j - 1] = EPS_HUGE
            est = E[:, 0] if n % 2 == 0 else E[:, 1]
            np.copyto(out, est)
            frozen = degen != 0
            out[frozen] = prev[frozen]
        self.count = n + 1
        return float(np.max(np.abs(out - prev))) if out.shape[0] else 0.0
