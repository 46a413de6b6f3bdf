# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Zhang-Shasha kernels; same contract as ``_ted_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64


def treedist(const i64[::1] lab_x, const i64[::1] lml_x, const i64[::1] kr_x,
             const i64[::1] lab_y, const i64[::1] lml_y, const i64[::1] kr_y):
    cdef Py_ssize_t n = lab_x.shape[0], m = lab_y.shape[0]
    td_arr = np.zeros((n, m), dtype=np.int64)
    fd_arr = np.zeros((n + 1, m + 1), dtype=np.int64)
    cdef i64[:, ::1] td = td_arr
    cdef i64[:, ::1] fd = fd_arr
    cdef Py_ssize_t ki, kj, i, j, li, lj, rows, cols, a, b, p, q, lp, lq
    cdef i64 v, sub
    with nogil:
        for ki in range(kr_x.shape[0]):
            i = kr_x[ki]
            li = lml_x[i]
            rows = i - li + 2
            for kj in range(kr_y.shape[0]):
                j = kr_y[kj]
                lj = lml_y[j]
                cols = j - lj + 2
                for b in range(cols):
                    fd[0, b] = b
                for a in range(1, rows):
                    p = li + a - 1
                    lp = lml_x[p]
                    fd[a, 0] = a
                    for b in range(1, cols):
                        q = lj + b - 1
                        lq = lml_y[q]
                        v = fd[a - 1, b] + 1
                        if fd[a, b - 1] + 1 < v:
                            v = fd[a, b - 1] + 1
                        if lp == li and lq == lj:
                            sub = fd[a - 1, b - 1] + (lab_x[p] != lab_y[q])
                            if sub < v:
                                v = sub
                            fd[a, b] = v
                            td[p, q] = v
                        else:
                            sub = fd[lp - li, lq - lj] + td[p, q]
                            if sub < v:
                                v = sub
                            fd[a, b] = v
    return td_arr


def forest_table(Py_ssize_t i, Py_ssize_t j,
                 const i64[::1] lab_x, const i64[::1] lml_x,
                 const i64[::1] lab_y, const i64[::1] lml_y,
                 const i64[:, ::1] td):
    cdef Py_ssize_t li = lml_x[i], lj = lml_y[j]
    cdef Py_ssize_t rows = i - li + 2, cols = j - lj + 2
    fd_arr = np.zeros((rows, cols), dtype=np.int64)
    cdef i64[:, ::1] fd = fd_arr
    cdef Py_ssize_t a, b, p, q, lp, lq
    cdef i64 v, sub
    with nogil:
        for b in range(cols):
            fd[0, b] = b
        for a in range(1, rows):
            p = li + a - 1
            lp = lml_x[p]
            fd[a, 0] = a
            for b in range(1, cols):
                q = lj + b - 1
                lq = lml_y[q]
                v = fd[a - 1, b] + 1
                if fd[a, b - 1] + 1 < v:
                    v = fd[a, b - 1] + 1
                if lp == li and lq == lj:
                    sub = fd[a - 1, b - 1] + (lab_x[p] != lab_y[q])
                else:
                    sub = fd[lp - li, lq - lj] + td[p, q]
                if sub < v:
                    v = sub
                fd[a, b] = v
    return fd_arr
