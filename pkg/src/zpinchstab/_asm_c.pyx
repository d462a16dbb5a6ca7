# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled assembly kernel; same contract as the NumPy fallback."""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def accumulate_forms(double[:, :] w,
                     double[:, :, :] coeff,
                     double[:, :, :, :] alpha,
                     double[:, :, :, :] beta,
                     double[:, :, :] phi,
                     double[:, :, :] dphi):
    """Element matrices of the weighted-square term list; see _asm_py."""
    cdef Py_ssize_t T = coeff.shape[0]
    cdef Py_ssize_t E = w.shape[0]
    cdef Py_ssize_t Q = w.shape[1]
    cdef Py_ssize_t A = phi.shape[2]
    cdef Py_ssize_t F = alpha.shape[3]
    cdef Py_ssize_t n = A * F
    out_arr = np.zeros((E, n, n), dtype=np.float64)
    cdef double[:, :, :] out = out_arr
    loc_arr = np.zeros(n, dtype=np.float64)
    cdef double[:] loc = loc_arr
    cdef Py_ssize_t e, q, t, a, f, i, j
    cdef double wq, c, pa, da, li

    for e in range(E):
        for q in range(Q):
            wq = w[e, q]
            for t in range(T):
                c = coeff[t, e, q] * wq
                if c == 0.0:
                    continue
                for a in range(A):
                    pa = phi[e, q, a]
                    da = dphi[e, q, a]
                    for f in range(F):
                        loc[a * F + f] = alpha[t, e, q, f] * pa + beta[t, e, q, f] * da
                for i in range(n):
                    li = c * loc[i]
                    if li == 0.0:
                        continue
                    for j in range(n):
                        out[e, i, j] += li * loc[j]
    return out_arr
