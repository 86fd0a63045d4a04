# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Gauss-Jordan elimination over F_p on int64 buffers."""

cimport cython
from libc.stdint cimport int64_t


cdef inline int64_t _inv(int64_t a, int64_t p):
    cdef int64_t t = 0, nt = 1, r = p, nr = a % p, q, tmp
    while nr != 0:
        q = r // nr
        tmp = t - q * nt
        t = nt
        nt = tmp
        tmp = r - q * nr
        r = nr
        nr = tmp
    if t < 0:
        t += p
    return t


def rref_inplace(int64_t[:, ::1] A, Py_ssize_t ncols, int64_t p):
    """Reduce A in place, pivoting only in the first ncols columns.

    Entries must already lie in [0, p). Returns the list of pivot columns.
    """
    cdef Py_ssize_t m = A.shape[0], w = A.shape[1]
    cdef Py_ssize_t r = 0, c, i, j, piv
    cdef int64_t f, s, tmp
    pivots = []
    for c in range(ncols):
        if r >= m:
            break
        piv = -1
        for i in range(r, m):
            if A[i, c] != 0:
                piv = i
                break
        if piv < 0:
            continue
        if piv != r:
            for j in range(c, w):
                tmp = A[r, j]
                A[r, j] = A[piv, j]
                A[piv, j] = tmp
        s = _inv(A[r, c], p)
        if s != 1:
            for j in range(c, w):
                A[r, j] = (A[r, j] * s) % p
        for i in range(m):
            if i == r:
                continue
            f = A[i, c]
            if f == 0:
                continue
            f = p - f
            for j in range(c, w):
                if A[r, j] != 0:
                    A[i, j] = (A[i, j] + f * A[r, j]) % p
        pivots.append(c)
        r += 1
    return pivots
