# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the per-order hot kernels.

Semantics match ``_pure`` exactly; see that module for documentation.
Inner loops use explicit real/imaginary arithmetic so the C compiler can
vectorise them instead of calling the libgcc complex-multiply helpers.
"""


import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

NAME = "compiled"

cdef double EPS_TINY_REL = 1e-13
cdef double EPS_HUGE = 1e30


def reciprocal_update(double complex[:, ::1] V, double complex[:, ::1] W, Py_ssize_t n):
    cdef Py_ssize_t nnodes = V.shape[1]
    cdef Py_ssize_t i, k
    cdef double ar, ai, br, bi, vr, vi, den
    if n == 0:
        for i in range(nnodes):
            W[0, i] = 1.0 / V[0, i]
        return
    cdef double[::1] acc_re = np.zeros(nnodes, dtype=np.float64)
    cdef double[::1] acc_im = np.zeros(nnodes, dtype=np.float64)
    for k in range(n):
        for i in range(nnodes):
            ar = W[k, i].real
            ai = W[k, i].imag
            br = V[n - k, i].real
            bi = V[n - k, i].imag
            acc_re[i] += ar * br - ai * bi
            acc_im[i] += ar * bi + ai * br
    for i in range(nnodes):
        # -acc / V[0]: multiply by the conjugate over the squared magnitude
        vr = V[0, i].real
        vi = V[0, i].imag
        den = vr * vr + vi * vi
        ar = -acc_re[i]
        ai = -acc_im[i]
        W[n, i] = (ar * vr + ai * vi) / den + 1j * ((ai * vr - ar * vi) / den)


def make_sweep_schedule(order_fwd, parent_idx, z_in):
    return (
        np.ascontiguousarray(order_fwd, dtype=np.int32),
        np.ascontiguousarray(parent_idx, dtype=np.int32),
        np.ascontiguousarray(z_in, dtype=np.complex128),
    )


def sweep_solve(schedule, rhs):
    cdef int[::1] order = schedule[0]
    cdef int[::1] parent = schedule[1]
    cdef double complex[::1] z = schedule[2]
    cdef double complex[::1] b = np.ascontiguousarray(rhs, dtype=np.complex128)
    cdef Py_ssize_t nnodes = order.shape[0]
    cdef cnp.ndarray out = np.empty(nnodes, dtype=np.complex128)
    cdef double complex[::1] x = out
    cdef double complex[::1] flow = np.empty(nnodes, dtype=np.complex128)
    cdef Py_ssize_t k, i
    cdef int p
    cdef double fr, fi, zr, zi, xr, xi
    for i in range(nnodes):
        flow[i] = -b[i]
    for k in range(nnodes - 1, -1, -1):
        i = order[k]
        p = parent[i]
        if p >= 0:
            flow[p] = flow[p] + flow[i]
    for k in range(nnodes):
        i = order[k]
        p = parent[i]
        if p >= 0:
            xr = x[p].real
            xi = x[p].imag
        else:
            xr = 0.0
            xi = 0.0
        zr = z[i].real
        zi = z[i].imag
        fr = flow[i].real
        fi = flow[i].imag
        x[i] = (xr - (zr * fr - zi * fi)) + 1j * (xi - (zr * fi + zi * fr))
    return out


# below this size the split-plane axpy loops beat BLAS zgemv dispatch
DEF DENSE_AXPY_LIMIT = 96


def make_dense_operator(A):
    """Precompute the layout dense_apply wants.

    Small operators become transposed re/im planes: the apply then runs as
    a sequence of axpy updates whose lanes are independent, which
    vectorises under strict FP rules. Large operators stay complex and go
    through BLAS, which wins once the matrix no longer fits close caches.
    """
    A = np.ascontiguousarray(A, dtype=np.complex128)
    if A.shape[0] >= DENSE_AXPY_LIMIT:
        return ("blas", A)
    return ("axpy", np.ascontiguousarray(A.T.real), np.ascontiguousarray(A.T.imag))


def dense_apply(operator, x):
    """Complex matrix-vector product on the prepared operator."""
    if operator[0] == "blas":
        return operator[1] @ x
    return _dense_apply_axpy(operator, x)


def _dense_apply_axpy(operator, x):
    cdef double[:, ::1] ArT = operator[1]
    cdef double[:, ::1] AiT = operator[2]
    cdef double complex[::1] xv = np.ascontiguousarray(x, dtype=np.complex128)
    cdef Py_ssize_t m = ArT.shape[0]   # columns of A == len(x)
    cdef Py_ssize_t n = ArT.shape[1]   # rows of A == len(out)
    cdef cnp.ndarray out_arr = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef cnp.ndarray scratch = np.zeros(2 * n, dtype=np.float64)
    cdef double[::1] sc = scratch
    cdef double* accr = &sc[0]
    cdef double* acci = &sc[n]
    cdef double* ar_col
    cdef double* ai_col
    cdef double xr, xi
    cdef Py_ssize_t i, j
    for j in range(m):
        xr = xv[j].real
        xi = xv[j].imag
        ar_col = &ArT[j, 0]
        ai_col = &AiT[j, 0]
        for i in range(n):
            accr[i] += ar_col[i] * xr - ai_col[i] * xi
            acci[i] += ar_col[i] * xi + ai_col[i] * xr
    for i in range(n):
        out[i] = accr[i] + 1j * acci[i]
    return out_arr


cdef class EpsilonAccelerator:
    """Per-solve epsilon-table state with the update loop fused in.

    Buffer views are acquired once at construction, so the per-order call
    costs little beyond the table arithmetic itself.
    """

    cdef public object table_arr, sums_arr, est_arr, degen_arr
    cdef double complex[:, ::1] E
    cdef double complex[:, ::1] sums
    cdef double complex[:, ::1] est
    cdef cnp.uint8_t[::1] degen
    cdef public Py_ssize_t count

    def __init__(self, Py_ssize_t n_nodes, Py_ssize_t slots):
        self.table_arr = np.zeros((n_nodes, slots), dtype=np.complex128)
        self.sums_arr = np.zeros((slots, n_nodes), dtype=np.complex128)
        self.est_arr = np.zeros((2, n_nodes), dtype=np.complex128)
        self.degen_arr = np.zeros(n_nodes, dtype=np.uint8)
        self.E = self.table_arr
        self.sums = self.sums_arr
        self.est = self.est_arr
        self.degen = self.degen_arr
        self.count = 0

    def latest(self):
        return self.est_arr[self.count % 2] if self.count else self.est_arr[0]

    def previous(self):
        return self.est_arr[(self.count - 1) % 2] if self.count > 1 else self.est_arr[0]

    def update(self, double complex[::1] coeff):
        cdef Py_ssize_t n = self.count
        if n >= self.sums.shape[0]:
            raise ValueError("acceleration table is full; enlarge max_order")
        cdef Py_ssize_t nnodes = self.E.shape[0]
        cdef Py_ssize_t prev_row = (n % 2) if n else 0
        cdef Py_ssize_t out_row = (n + 1) % 2
        cdef Py_ssize_t i, j
        cdef double complex aux1, aux2, est, snew, prev_e
        cdef double dr, di, den, er, ei, mag, dmax, dre, dim, d
        dmax = 0.0
        for i in range(nnodes):
            snew = coeff[i] if n == 0 else self.sums[n - 1, i] + coeff[i]
            self.sums[n, i] = snew
            self.E[i, n] = snew
            self.degen[i] = 0
            prev_e = self.est[prev_row, i]
            if n == 0:
                self.est[out_row, i] = snew
                dre = snew.real - prev_e.real
                dim = snew.imag - prev_e.imag
                d = sqrt(dre * dre + dim * dim)
                if d > dmax:
                    dmax = d
                continue
            aux2 = 0
            for j in range(n, 0, -1):
                aux1 = aux2
                aux2 = self.E[i, j - 1]
                dr = self.E[i, j].real - aux2.real
                di = self.E[i, j].imag - aux2.imag
                er = self.E[i, j].real
                ei = self.E[i, j].imag
                mag = sqrt(er * er + ei * ei)
                if sqrt(dr * dr + di * di) < EPS_TINY_REL * (1.0 + mag):
                    self.degen[i] = 1
                    self.E[i, j - 1] = EPS_HUGE
                else:
                    den = dr * dr + di * di
                    self.E[i, j - 1] = (aux1.real + dr / den) + 1j * (aux1.imag - di / den)
            if self.degen[i]:
                self.est[out_row, i] = prev_e
            else:
                est = self.E[i, 0] if n % 2 == 0 else self.E[i, 1]
                self.est[out_row, i] = est
                dre = est.real - prev_e.real
                dim = est.imag - prev_e.imag
                d = sqrt(dre * dre + dim * dim)
                if d > dmax:
                    dmax = d
        self.count = n + 1
        return dmax
