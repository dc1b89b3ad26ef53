# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scan kernels over codes packed into little-endian 64-bit words."""

from libc.stdint cimport int32_t, int64_t, uint64_t


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil
    int __builtin_ctzll(unsigned long long) nogil


def hamming_scan(const uint64_t[:, ::1] db, const uint64_t[::1] query, int32_t[::1] out):
    cdef Py_ssize_t n = db.shape[0], nw = db.shape[1], i, w
    cdef int32_t acc
    with nogil:
        for i in range(n):
            acc = 0
            for w in range(nw):
                acc += __builtin_popcountll(db[i, w] ^ query[w])
            out[i] = acc


cdef inline double _weighted(const uint64_t[:, ::1] db, const uint64_t[::1] query,
                             const double[::1] w2, Py_ssize_t i) noexcept nogil:
    # bits visited in ascending order so the sum matches a plain per-bit loop
    cdef Py_ssize_t nw = db.shape[1], w
    cdef uint64_t x
    cdef double acc = 0.0
    for w in range(nw):
        x = db[i, w] ^ query[w]
        while x:
            acc += w2[w * 64 + __builtin_ctzll(x)]
            x &= x - 1
    return acc


def weighted_scan(const uint64_t[:, ::1] db, const uint64_t[::1] query,
                  const double[::1] w2, double[::1] out):
    cdef Py_ssize_t n = db.shape[0], i
    with nogil:
        for i in range(n):
            out[i] = _weighted(db, query, w2, i)


def weighted_scan_rows(const uint64_t[:, ::1] db, const uint64_t[::1] query,
                       const double[::1] w2, const int64_t[::1] rows, double[::1] out):
    cdef Py_ssize_t m = rows.shape[0], r
    with nogil:
        for r in range(m):
            out[r] = _weighted(db, query, w2, rows[r])


def radius_filter(const uint64_t[:, ::1] db, const uint64_t[::1] query, int radius,
                  int64_t[::1] out):
    """Write indices of items within ``radius``; returns how many were found."""
    cdef Py_ssize_t n = db.shape[0], nw = db.shape[1], i, w, count = 0
    cdef int acc
    with nogil:
        for i in range(n):
            acc = 0
            for w in range(nw):
                acc += __builtin_popcountll(db[i, w] ^ query[w])
                if acc > radius:
                    break
            if acc <= radius:
                out[count] = i
                count += 1
    return count
