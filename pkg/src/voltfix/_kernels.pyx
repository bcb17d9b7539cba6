# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Mirrors :mod:`voltfix._fallback` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def tri_rowsum(const double[:, :] G, double h, bint simpson):
    """Row ``i`` integrates ``G[i, 0..i]`` over nodes spaced ``h``.

    Only the lower triangle of ``G`` is read. Simpson rows with odd ``i``
    use the trapezoid rule on the last panel.
    """
    cdef Py_ssize_t n = G.shape[0]
    cdef Py_ssize_t i, j, m
    cdef double acc, odd, even
    out = np.zeros(n, dtype=np.float64)
    cdef double[:] res = out
    for i in range(1, n):
        if not simpson:
            acc = 0.5 * (G[i, 0] + G[i, i])
            for j in range(1, i):
                acc += G[i, j]
            res[i] = h * acc
        else:
            m = i if i % 2 == 0 else i - 1
            acc = 0.0
            if m >= 2:
                odd = 0.0
                even = 0.0
                for j in range(1, m, 2):
                    odd += G[i, j]
                for j in range(2, m, 2):
                    even += G[i, j]
                acc = h / 3.0 * (G[i, 0] + 4.0 * odd + 2.0 * even + G[i, m])
            if m != i:
                acc += 0.5 * h * (G[i, i - 1] + G[i, i])
            res[i] = acc
    return out


def window_modulus(const double[:, :] X, Py_ssize_t w):
    """Per row, max of ``|X[r, j] - X[r, i]|`` over ``0 < j - i <= w``.

    Equals the largest max-minus-min over windows of ``w + 1`` nodes, which
    monotone index queues track in one pass.
    """
    cdef Py_ssize_t m = X.shape[0]
    cdef Py_ssize_t n = X.shape[1]
    cdef Py_ssize_t r, j, hi_head, hi_tail, lo_head, lo_tail
    cdef double best, d
    out = np.zeros(m, dtype=np.float64)
    cdef double[:] res = out
    hi_buf = np.empty(max(n, 1), dtype=np.intp)
    lo_buf = np.empty(max(n, 1), dtype=np.intp)
    cdef Py_ssize_t[:] hi = hi_buf
    cdef Py_ssize_t[:] lo = lo_buf
    if w < 1:
        return out
    for r in range(m):
        best = 0.0
        hi_head = hi_tail = lo_head = lo_tail = 0
        for j in range(n):
            while hi_tail > hi_head and X[r, hi[hi_tail - 1]] <= X[r, j]:
                hi_tail -= 1
            hi[hi_tail] = j
            hi_tail += 1
            while lo_tail > lo_head and X[r, lo[lo_tail - 1]] >= X[r, j]:
                lo_tail -= 1
            lo[lo_tail] = j
            lo_tail += 1
            if hi[hi_head] < j - w:
                hi_head += 1
            if lo[lo_head] < j - w:
                lo_head += 1
            d = X[r, hi[hi_head]] - X[r, lo[lo_head]]
            if d > best:
                best = d
        res[r] = best
    return out
