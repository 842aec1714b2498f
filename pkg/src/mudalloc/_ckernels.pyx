# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. See ``_pykernels`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


def dykstra_project(point, double q_s, double q_l, double tol, int max_sweeps, warm=None):
    z = np.array(point, dtype=np.float64, copy=True, order="C")
    cdef Py_ssize_t K = z.shape[0], J = z.shape[1]
    if warm is None:
        pr = np.zeros((K, J))
        pc = np.zeros((K, J))
        pb = np.zeros((K, J))
    else:
        pr, pc, pb = (np.array(p, dtype=np.float64, copy=True, order="C") for p in warm)
    cdef double[:, ::1] p_row = pr
    cdef double[:, ::1] p_col = pc
    cdef double[:, ::1] p_box = pb
    x_arr = z - pr - pc - pb
    cdef double[:, ::1] x = x_arr
    cdef double[::1] shift_j = np.empty(J)
    cdef Py_ssize_t k, j
    cdef double y, shift, move, v, d
    cdef int sweeps = 0

    while sweeps < max_sweeps:
        sweeps += 1
        move = 0.0

        # row half-spaces: sum_j x >= q_l
        for k in range(K):
            v = 0.0
            for j in range(J):
                v += x[k, j] + p_row[k, j]
            shift = (q_l - v) / J if v < q_l else 0.0
            for j in range(J):
                y = x[k, j] + p_row[k, j]
                x[k, j] = y + shift
                d = fabs(-shift - p_row[k, j])
                if d > move:
                    move = d
                p_row[k, j] = -shift

        # column half-spaces: sum_k x <= q_s
        for j in range(J):
            shift_j[j] = 0.0
        for k in range(K):
            for j in range(J):
                shift_j[j] += x[k, j] + p_col[k, j]
        for j in range(J):
            shift_j[j] = (shift_j[j] - q_s) / K if shift_j[j] > q_s else 0.0
        for k in range(K):
            for j in range(J):
                y = x[k, j] + p_col[k, j]
                x[k, j] = y - shift_j[j]
                d = fabs(shift_j[j] - p_col[k, j])
                if d > move:
                    move = d
                p_col[k, j] = shift_j[j]

        # box
        for k in range(K):
            for j in range(J):
                y = x[k, j] + p_box[k, j]
                v = 0.0 if y < 0.0 else (1.0 if y > 1.0 else y)
                x[k, j] = v
                d = fabs(y - v - p_box[k, j])
                if d > move:
                    move = d
                p_box[k, j] = y - v

        if move < tol:
            break
    return x_arr, sweeps, (pr, pc, pb)


def separable_sqrt_linear(q, c, w, double floor):
    cdef double[:, ::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double[:, ::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef double[:, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t K = qv.shape[0], J = qv.shape[1]
    grad_arr = np.empty((K, J))
    cdef double[:, ::1] g = grad_arr
    cdef double value = 0.0, qq, r
    cdef Py_ssize_t k, j
    for k in range(K):
        for j in range(J):
            qq = qv[k, j]
            value += 2.0 * cv[k, j] * (sqrt(qq) if qq > 0.0 else 0.0) - wv[k, j] * qq
            r = sqrt(qq if qq > floor else floor)
            g[k, j] = cv[k, j] / r - wv[k, j]
    return value, grad_arr
