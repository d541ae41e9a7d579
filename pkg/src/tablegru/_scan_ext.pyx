# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled recurrent scans; same contract as ``_scan_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport tanh
from scipy.linalg.cython_blas cimport dgemv

cnp.import_array()


cdef inline double _sigmoid(double x) nogil:
    return 0.5 * (1.0 + tanh(0.5 * x))


# y = M @ x for row-major M (rows x cols); BLAS sees M as column-major M.T
cdef inline void _matvec(double* m, int rows, int cols, double* x, double* y) nogil:
    cdef char trans = b'T'
    cdef double one = 1.0, zero = 0.0
    cdef int inc = 1
    dgemv(&trans, &cols, &rows, &one, m, &cols, x, &inc, &zero, y, &inc)


# y = M.T @ x for row-major M (rows x cols)
cdef inline void _matvec_t(double* m, int rows, int cols, double* x, double* y) nogil:
    cdef char trans = b'N'
    cdef double one = 1.0, zero = 0.0
    cdef int inc = 1
    dgemv(&trans, &cols, &rows, &one, m, &cols, x, &inc, &zero, y, &inc)


def gru_forward(double[:, ::1] xg, double[:, ::1] u):
    cdef Py_ssize_t T = xg.shape[0], G = xg.shape[1], H = G // 3
    cdef Py_ssize_t t, k
    gates_a = np.empty((T, G))
    hs_a = np.zeros((T + 1, H))
    cdef double[:, ::1] gates = gates_a
    cdef double[:, ::1] hs = hs_a
    cdef double[::1] buf = np.empty(2 * H)
    cdef double[::1] rh = np.empty(H)
    cdef double[::1] bh = np.empty(H)
    cdef double z, r, cand
    with nogil:
        for t in range(T):
            _matvec(&u[0, 0], 2 * H, H, &hs[t, 0], &buf[0])
            for k in range(H):
                r = _sigmoid(xg[t, H + k] + buf[H + k])
                gates[t, H + k] = r
                rh[k] = r * hs[t, k]
            _matvec(&u[2 * H, 0], H, H, &rh[0], &bh[0])
            for k in range(H):
                z = _sigmoid(xg[t, k] + buf[k])
                cand = tanh(xg[t, 2 * H + k] + bh[k])
                gates[t, k] = z
                gates[t, 2 * H + k] = cand
                hs[t + 1, k] = (1.0 - z) * hs[t, k] + z * cand
    return gates_a, hs_a


def gru_backward(double[:, ::1] dhs, double[:, ::1] gates, double[:, ::1] hs,
                 double[:, ::1] u):
    cdef Py_ssize_t T = gates.shape[0], G = gates.shape[1], H = G // 3
    cdef Py_ssize_t t, k
    da_a = np.empty((T, G))
    cdef double[:, ::1] da = da_a
    cdef double[::1] dh_next = np.zeros(H)
    cdef double[::1] dh = np.empty(H)
    cdef double[::1] d_rh = np.empty(H)
    cdef double[::1] d_zr = np.empty(H)
    cdef double z, r, cand, hp
    with nogil:
        for t in range(T - 1, -1, -1):
            for k in range(H):
                dh[k] = dhs[t, k] + dh_next[k]
                z = gates[t, k]
                cand = gates[t, 2 * H + k]
                da[t, 2 * H + k] = dh[k] * z * (1.0 - cand * cand)
                da[t, k] = dh[k] * (cand - hs[t, k]) * z * (1.0 - z)
            _matvec_t(&u[2 * H, 0], H, H, &da[t, 2 * H], &d_rh[0])
            for k in range(H):
                r = gates[t, H + k]
                da[t, H + k] = d_rh[k] * hs[t, k] * r * (1.0 - r)
            _matvec_t(&u[0, 0], 2 * H, H, &da[t, 0], &d_zr[0])
            for k in range(H):
                dh_next[k] = (dh[k] * (1.0 - gates[t, k]) + d_rh[k] * gates[t, H + k]
                              + d_zr[k])
    return da_a


def lstm_forward(double[:, ::1] xg, double[:, ::1] u):
    cdef Py_ssize_t T = xg.shape[0], G = xg.shape[1], H = G // 4
    cdef Py_ssize_t t, k
    gates_a = np.empty((T, G))
    hs_a = np.zeros((T + 1, H))
    cs_a = np.zeros((T + 1, H))
    cdef double[:, ::1] gates = gates_a
    cdef double[:, ::1] hs = hs_a
    cdef double[:, ::1] cs = cs_a
    cdef double[::1] buf = np.empty(G)
    cdef double i, f, o, g, c
    with nogil:
        for t in range(T):
            _matvec(&u[0, 0], G, H, &hs[t, 0], &buf[0])
            for k in range(H):
                i = _sigmoid(xg[t, k] + buf[k])
                f = _sigmoid(xg[t, H + k] + buf[H + k])
                o = _sigmoid(xg[t, 2 * H + k] + buf[2 * H + k])
                g = tanh(xg[t, 3 * H + k] + buf[3 * H + k])
                c = f * cs[t, k] + i * g
                gates[t, k] = i
                gates[t, H + k] = f
                gates[t, 2 * H + k] = o
                gates[t, 3 * H + k] = g
                cs[t + 1, k] = c
                hs[t + 1, k] = o * tanh(c)
    return gates_a, hs_a, cs_a


def lstm_backward(double[:, ::1] dhs, double[:, ::1] gates, double[:, ::1] hs,
                  double[:, ::1] cs, double[:, ::1] u):
    cdef Py_ssize_t T = gates.shape[0], G = gates.shape[1], H = G // 4
    cdef Py_ssize_t t, k
    da_a = np.empty((T, G))
    cdef double[:, ::1] da = da_a
    cdef double[::1] dh_next = np.zeros(H)
    cdef double[::1] dc_next = np.zeros(H)
    cdef double i, f, o, g, tc, dh, dc
    with nogil:
        for t in range(T - 1, -1, -1):
            for k in range(H):
                i = gates[t, k]
                f = gates[t, H + k]
                o = gates[t, 2 * H + k]
                g = gates[t, 3 * H + k]
                tc = tanh(cs[t + 1, k])
                dh = dhs[t, k] + dh_next[k]
                dc = dc_next[k] + dh * o * (1.0 - tc * tc)
                da[t, k] = dc * g * i * (1.0 - i)
                da[t, H + k] = dc * cs[t, k] * f * (1.0 - f)
                da[t, 2 * H + k] = dh * tc * o * (1.0 - o)
                da[t, 3 * H + k] = dc * i * (1.0 - g * g)
                dc_next[k] = dc * f
            _matvec_t(&u[0, 0], G, H, &da[t, 0], &dh_next[0])
    return da_a
