# cython: language_level=3
"""Compiled kernels; contracts and tie-breaking identical to kernels.pure."""

from libc.math cimport log2
from libc.string cimport memset

import numpy as np

cimport numpy as cnp

cnp.import_array()

COUNT_SPACE_GUARD = 1 << 24


def pack_keys(cnp.ndarray[cnp.uint8_t, ndim=2] rows,
              cnp.ndarray[cnp.int64_t, ndim=1] coords,
              long alphabet):
    cdef Py_ssize_t m = rows.shape[0]
    cdef Py_ssize_t k = coords.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] keys = np.zeros(m, dtype=np.int64)
    cdef Py_ssize_t r, t
    cdef long long acc
    for r in range(m):
        acc = 0
        for t in range(k):
            acc = acc * alphabet + rows[r, coords[t]]
        keys[r] = acc
    return keys


def group_weights(cnp.ndarray[cnp.int64_t, ndim=1] keys,
                  cnp.ndarray[cnp.int64_t, ndim=1] weights):
    cdef Py_ssize_t m = keys.shape[0]
    if m == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] order = np.argsort(keys, kind="stable")
    cdef cnp.ndarray[cnp.int64_t, ndim=1] uniq = np.empty(m, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] sums = np.zeros(m, dtype=np.int64)
    cdef Py_ssize_t out = -1
    cdef Py_ssize_t r
    cdef long long prev = 0
    for r in range(m):
        if out < 0 or keys[order[r]] != prev:
            out += 1
            prev = keys[order[r]]
            uniq[out] = prev
        sums[out] += weights[order[r]]
    return uniq[: out + 1].copy(), sums[: out + 1].copy()


def group_max_weight(cnp.ndarray[cnp.int64_t, ndim=1] keys,
                     cnp.ndarray[cnp.int64_t, ndim=1] weights):
    if keys.shape[0] == 0:
        return 0
    _, sums = group_weights(keys, weights)
    return int(sums.max())


def gn_codes(cnp.ndarray[cnp.uint8_t, ndim=2] table,
             cnp.ndarray[cnp.uint8_t, ndim=1] x,
             cnp.ndarray[cnp.uint8_t, ndim=2] rows):
    cdef Py_ssize_t m = rows.shape[0]
    cdef Py_ssize_t n = rows.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] codes = np.zeros(m, dtype=np.int64)
    cdef Py_ssize_t r, i
    cdef long long acc
    for r in range(m):
        acc = 0
        for i in range(n):
            acc |= (<long long> table[x[i], rows[r, i]]) << i
        codes[r] = acc
    return codes


def disc_scan(cnp.ndarray[cnp.int8_t, ndim=2] sign,
              cnp.ndarray[cnp.int64_t, ndim=1] wx,
              cnp.ndarray[cnp.int64_t, ndim=1] wy):
    cdef Py_ssize_t lx = sign.shape[0]
    cdef Py_ssize_t ly = sign.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rs = np.zeros(lx, dtype=np.int64)
    cdef long long best = 0, pos, neg, colmask = 0
    cdef long long best_rows = 0, best_cols = 0, i, total = 1
    cdef Py_ssize_t j, u
    cdef int adding
    total <<= ly
    for i in range(1, total):
        j = 0
        while not (i >> j) & 1:
            j += 1
        adding = 0 if (colmask >> j) & 1 else 1
        if adding:
            for u in range(lx):
                rs[u] += (<long long> sign[u, j]) * wy[j]
        else:
            for u in range(lx):
                rs[u] -= (<long long> sign[u, j]) * wy[j]
        colmask ^= (<long long> 1) << j
        pos = 0
        neg = 0
        for u in range(lx):
            if rs[u] > 0:
                pos += wx[u] * rs[u]
            elif rs[u] < 0:
                neg -= wx[u] * rs[u]
        if pos > best:
            best = pos
            best_cols = colmask
            best_rows = 0
            for u in range(lx):
                if rs[u] > 0:
                    best_rows |= (<long long> 1) << u
        if neg > best:
            best = neg
            best_cols = colmask
            best_rows = 0
            for u in range(lx):
                if rs[u] < 0:
                    best_rows |= (<long long> 1) << u
    return int(best), int(best_rows), int(best_cols)


def heavy_scan(cnp.ndarray[cnp.uint8_t, ndim=2] rows,
               cnp.ndarray[cnp.int64_t, ndim=1] weights,
               sel,
               cnp.ndarray[cnp.int64_t, ndim=1] universe,
               long alphabet,
               cnp.ndarray[cnp.float64_t, ndim=1] thr_log,
               double tol):
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] sel8 = np.ascontiguousarray(
        np.asarray(sel, dtype=bool).view(np.uint8))
    cdef Py_ssize_t m = rows.shape[0]
    cdef Py_ssize_t k = universe.shape[0]
    marks_arr = np.zeros(m, dtype=bool)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] marks = marks_arr.view(np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] mass = np.zeros(1 << k, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] idx = np.nonzero(sel8)[0].astype(np.int64)
    cdef Py_ssize_t msel = idx.shape[0]
    if msel == 0 or k == 0:
        return marks_arr, mass
    cdef long long w_total = 0
    cdef Py_ssize_t r, t, size
    for r in range(msel):
        w_total += weights[idx[r]]
    cdef double log_total = log2(<double> w_total)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] keys = np.zeros(msel, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts
    cdef long long jmask, space, key
    cdef double thr
    cdef long long space_max = 1
    for t in range(k):
        if space_max * alphabet <= (1 << 20):
            space_max *= alphabet
        else:
            break
    counts = np.zeros(space_max, dtype=np.int64)
    for jmask in range(1, <long long> 1 << k):
        size = 0
        space = 1
        for t in range(k):
            if (jmask >> t) & 1:
                size += 1
                space *= alphabet
        thr = thr_log[size] + tol
        if space <= space_max:
            for r in range(msel):
                key = 0
                for t in range(k):
                    if (jmask >> t) & 1:
                        key = key * alphabet + rows[idx[r], universe[t]]
                keys[r] = key
                counts[key] += weights[idx[r]]
            for r in range(msel):
                if log2(<double> counts[keys[r]]) - log_total > thr:
                    marks[idx[r]] = 1
                    mass[jmask] += weights[idx[r]]
            for r in range(msel):
                counts[keys[r]] = 0
        else:
            # key space too large for a counting array; group by sorting
            for r in range(msel):
                key = 0
                for t in range(k):
                    if (jmask >> t) & 1:
                        key = key * alphabet + rows[idx[r], universe[t]]
                keys[r] = key
            uniq, sums = group_weights(keys, weights[idx])
            lookup = {int(u): int(s) for u, s in zip(uniq, sums)}
            for r in range(msel):
                if log2(<double> lookup[keys[r]]) - log_total > thr:
                    marks[idx[r]] = 1
                    mass[jmask] += weights[idx[r]]
    return marks_arr, mass
