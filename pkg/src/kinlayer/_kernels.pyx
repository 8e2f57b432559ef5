# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; see _kernels_py.py for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def sweep(double[::1] v3, double[::1] h, double[::1] d, double[:, :, ::1] q,
          double[:, ::1] inflow, cnp.intp_t[::1] reflect, double[:, :, ::1] out):
    cdef Py_ssize_t M = h.shape[0]
    cdef Py_ssize_t V = v3.shape[0]
    cdef Py_ssize_t R = q.shape[2]
    cdef Py_ssize_t k, v, r
    cdef double a, num, den, hd
    for v in range(V):
        if v3[v] > 0:
            hd = 0.5 * d[v]
            for r in range(R):
                out[0, v, r] = inflow[v, r]
            for k in range(M):
                a = v3[v] / h[k]
                num = a - hd
                den = a + hd
                for r in range(R):
                    out[k + 1, v, r] = (num * out[k, v, r] + q[k, v, r]) / den
    for v in range(V):
        if v3[v] <= 0:
            hd = 0.5 * d[v]
            for r in range(R):
                out[M, v, r] = out[M, reflect[v], r]
            for k in range(M - 1, -1, -1):
                a = -v3[v] / h[k]
                num = a - hd
                den = a + hd
                for r in range(R):
                    out[k, v, r] = (num * out[k + 1, v, r] + q[k, v, r]) / den
    return np.asarray(out)


cdef inline double _limit(double a, double b, int limiter) nogil:
    if a * b <= 0.0:
        return 0.0
    if limiter == 0:
        return a if fabs(a) < fabs(b) else b
    return 2.0 * a * b / (a + b)


def muscl_faces(double[:, ::1] u, double[::1] xc, double[::1] xf, double[::1] v3,
                int limiter, double[:, ::1] out):
    cdef Py_ssize_t N = u.shape[0] - 2
    cdef Py_ssize_t V = u.shape[1]
    cdef Py_ssize_t f, v, c
    cdef double gl, gr, s
    for f in range(N + 1):
        for v in range(V):
            if v3[v] > 0:
                c = f
                if c == 0:
                    out[f, v] = u[0, v]
                    continue
            else:
                c = f + 1
                if c == N + 1:
                    out[f, v] = u[N + 1, v]
                    continue
            gl = (u[c, v] - u[c - 1, v]) / (xc[c] - xc[c - 1])
            gr = (u[c + 1, v] - u[c, v]) / (xc[c + 1] - xc[c])
            s = _limit(gl, gr, limiter)
            if v3[v] > 0:
                out[f, v] = u[c, v] + s * (xf[f] - xc[c])
            else:
                out[f, v] = u[c, v] - s * (xc[c] - xf[f])
    return np.asarray(out)
