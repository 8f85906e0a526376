# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY, isinf

from ._kernels_py import N_SLOT_CATS as _PY_SLOT_CATS
from ._kernels_py import value_table

cnp.import_array()

cdef enum:
    N_SLOT_CATS = 20

assert N_SLOT_CATS == _PY_SLOT_CATS


cdef inline int _select_row(const double *d, Py_ssize_t M, double gap2,
                            double gap3, int *top) noexcept nogil:
    # Partial insertion sort of the four smallest distances; scanning
    # indices in ascending order with a strict comparison keeps the
    # lower index first on ties.
    cdef Py_ssize_t j
    cdef int ntop = 4 if M > 4 else <int>M
    cdef int filled = 0, p
    cdef double best[4]
    cdef double v
    for j in range(M):
        v = d[j]
        if filled < ntop:
            p = filled
            filled += 1
        elif v < best[ntop - 1]:
            p = ntop - 1
        else:
            continue
        while p > 0 and v < best[p - 1]:
            best[p] = best[p - 1]
            top[p] = top[p - 1]
            p -= 1
        best[p] = v
        top[p] = <int>j
    if M == 2:
        return 2
    if best[2] - best[1] >= gap2:
        return 2
    if M == 3:
        return 3
    if best[3] - best[2] >= gap3:
        return 3
    return 4


def select_groups(dist, double gap2, double gap3):
    cdef const double[:, ::1] D = np.ascontiguousarray(dist, dtype=np.float64)
    cdef Py_ssize_t S = D.shape[0], M = D.shape[1], s
    k_arr = np.empty(S, dtype=np.int8)
    mem_arr = np.full((S, 4), -1, dtype=np.int32)
    cdef signed char[::1] K = k_arr
    cdef int[:, ::1] MEM = mem_arr
    cdef int top[4]
    cdef int k, p
    with nogil:
        for s in range(S):
            k = _select_row(&D[s, 0], M, gap2, gap3, top)
            K[s] = <signed char>k
            for p in range(k):
                MEM[s, p] = top[p]
    return k_arr, mem_arr


cdef inline void _categories(int k, const int *top, Py_ssize_t M,
                             int *cat) noexcept nogil:
    # members take simplex codewords in ascending index order
    cdef Py_ssize_t j
    cdef int p, r = 0, pos = 0
    cdef bint member
    for j in range(M):
        member = False
        for p in range(k):
            if top[p] == j:
                member = True
                break
        if member:
            cat[j] = 4 * k + pos
            pos += 1
        else:
            cat[j] = N_SLOT_CATS + r
            r += 1


def message_categories(dist, double gap2, double gap3):
    cdef const double[:, ::1] D = np.ascontiguousarray(dist, dtype=np.float64)
    cdef Py_ssize_t S = D.shape[0], M = D.shape[1], s
    out = np.empty((S, M), dtype=np.int64)
    cdef long long[:, ::1] C = out
    cdef int top[4]
    cdef int k
    cdef Py_ssize_t j
    cdef int[::1] cat = np.empty(M, dtype=np.int32)
    with nogil:
        for s in range(S):
            k = _select_row(&D[s, 0], M, gap2, gap3, top)
            _categories(k, top, M, &cat[0])
            for j in range(M):
                C[s, j] = cat[j]
    return out


def category_counts(dist, double gap2, double gap3):
    cdef const double[:, ::1] D = np.ascontiguousarray(dist, dtype=np.float64)
    cdef Py_ssize_t S = D.shape[0], M = D.shape[1], s
    out = np.zeros((M, N_SLOT_CATS + M), dtype=np.int64)
    cdef long long[:, ::1] C = out
    cdef int top[4]
    cdef int k
    cdef Py_ssize_t j
    cdef int[::1] cat = np.empty(M, dtype=np.int32)
    with nogil:
        for s in range(S):
            k = _select_row(&D[s, 0], M, gap2, gap3, top)
            _categories(k, top, M, &cat[0])
            for j in range(M):
                C[j, cat[j]] += 1
    return out


def message_values(dist, double gap2, double gap3, slot_vals, rest_vals):
    return value_table(slot_vals, rest_vals)[message_categories(dist, gap2, gap3)]


def counts_loglik(counts, slot_vals, rest_vals):
    cdef const long long[:, ::1] C = np.ascontiguousarray(counts, dtype=np.int64)
    cdef Py_ssize_t M = C.shape[0], ncat = C.shape[1], j, c
    table_arr = value_table(slot_vals, rest_vals)
    cdef const double[::1] T = table_arr
    cdef Py_ssize_t nt = T.shape[0]
    out = np.empty(M)
    cdef double[::1] O = out
    cdef double mx, acc
    cdef long long S = 0
    for c in range(ncat):
        S += C[0, c]
    with nogil:
        for j in range(M):
            mx = -INFINITY
            for c in range(ncat):
                if C[j, c] > 0 and c < nt and T[c] > mx:
                    mx = T[c]
            acc = 0.0
            for c in range(ncat):
                if C[j, c] > 0 and c < nt:
                    acc += C[j, c] * exp(T[c] - mx)
            O[j] = mx + log(acc / S)
    return out


def mixture_loglik(dist, double gap2, double gap3, slot_vals, rest_vals):
    return counts_loglik(category_counts(dist, gap2, gap3), slot_vals, rest_vals)


def parabolic_cut_grid_min(double c1, double c2, double c3, double t,
                           double rhs, xs, ys):
    cdef const double[::1] X = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] Y = np.ascontiguousarray(ys, dtype=np.float64)
    cdef Py_ssize_t nx = X.shape[0], ny = Y.shape[0], i, j
    cdef double best = INFINITY, bx = X[0], by = Y[0]
    cdef double pos, part, obj
    cdef bint wall = isinf(c3)
    with nogil:
        for i in range(nx):
            for j in range(ny):
                pos = Y[j] + t
                if pos < 0.0:
                    pos = 0.0
                if wall:
                    if pos > 0.0:
                        continue
                    part = c2 * Y[j]
                else:
                    part = c2 * Y[j] - c3 * pos * pos
                if c1 * X[i] + part >= rhs:
                    obj = X[i] * X[i] + Y[j] * Y[j]
                    if obj < best:
                        best = obj
                        bx = X[i]
                        by = Y[j]
    return best, bx, by
