# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; see ``_kernels_python`` for the reference semantics."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _bisect_left(const double[::1] a, double v) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = a.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def recursive_counts(vals, quants, offsets, Py_ssize_t s0, order=None, sorted_vals=None):
    """Incremental single pass over ``s = 1..T``.

    Between consecutive subsamples a stream's quantile moves between
    neighbouring order statistics, so only elements valued between the old
    and new quantile change indicator.  They are located through the
    globally sorted values and patched into the running counts.
    """
    cdef const double[:, ::1] v = np.ascontiguousarray(vals, dtype=np.float64)
    cdef const double[:, ::1] q = np.ascontiguousarray(quants, dtype=np.float64)
    cdef const cnp.int64_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef Py_ssize_t m = v.shape[0], T = v.shape[1]
    if order is None:
        order = np.argsort(vals, axis=1, kind="stable")
    if sorted_vals is None:
        sorted_vals = np.take_along_axis(np.asarray(vals, dtype=np.float64), order, axis=1)
    cdef const cnp.int64_t[:, ::1] ordr = np.ascontiguousarray(order, dtype=np.int64)
    cdef const double[:, ::1] srt = np.ascontiguousarray(sorted_vals, dtype=np.float64)

    cdef Py_ssize_t S = T - s0 + 1
    n_arr = np.zeros(S, dtype=np.int64)
    c1_arr = np.zeros((S, m), dtype=np.int64)
    c2_arr = np.zeros((S, m, m), dtype=np.int64)
    cdef cnp.int64_t[::1] n_out = n_arr
    cdef cnp.int64_t[:, ::1] c1_out = c1_arr
    cdef cnp.int64_t[:, :, ::1] c2_out = c2_arr

    ind_arr = np.zeros((m, T), dtype=np.uint8)
    cdef unsigned char[:, ::1] ind = ind_arr
    qcur_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] qcur = qcur_arr
    c1_arr_run = np.zeros(m, dtype=np.int64)
    c2_arr_run = np.zeros((m, m), dtype=np.int64)
    cdef cnp.int64_t[::1] c1 = c1_arr_run
    cdef cnp.int64_t[:, ::1] c2 = c2_arr_run
    cdef cnp.int64_t n = 0

    cdef Py_ssize_t w0 = 0, j, i, r, ra, rb, u, t, s, row
    cdef double qn, qo, lo, hi
    cdef int delta
    for j in range(m):
        if off[j] > w0:
            w0 = off[j]

    with nogil:
        for s in range(1, T + 1):
            # s observations present: series indices 0..s-1, newest s-1
            for j in range(m):
                qn = q[j, s - 1]
                if s > 1 and qn != qcur[j]:
                    qo = qcur[j]
                    if qo < qn:
                        lo = qo
                        hi = qn
                    else:
                        lo = qn
                        hi = qo
                    ra = _bisect_left(srt[j], lo)
                    rb = _bisect_left(srt[j], hi)
                    for r in range(ra, rb):
                        u = ordr[j, r]
                        if u >= s - 1:
                            continue
                        ind[j, u] = 1 - ind[j, u]
                        delta = 1 if ind[j, u] else -1
                        t = u + off[j]
                        # window so far spans times w0..s-2
                        if t < w0 or t > s - 2:
                            continue
                        c1[j] += delta
                        c2[j, j] += delta
                        for i in range(m):
                            if i != j and ind[i, t - off[i]]:
                                c2[i, j] += delta
                                c2[j, i] += delta
                qcur[j] = qn
                ind[j, s - 1] = 1 if v[j, s - 1] < qn else 0
            t = s - 1
            if t >= w0:
                n += 1
                for j in range(m):
                    if ind[j, t - off[j]]:
                        c1[j] += 1
                        for i in range(m):
                            if ind[i, t - off[i]]:
                                c2[i, j] += 1
            if s >= s0:
                row = s - s0
                n_out[row] = n
                for j in range(m):
                    c1_out[row, j] = c1[j]
                    for i in range(m):
                        c2_out[row, i, j] = c2[i, j]
    return n_arr, c1_arr, c2_arr


def sb_fill_indices(starts, lengths, Py_ssize_t n_rows):
    cdef const cnp.int64_t[::1] st = np.ascontiguousarray(starts, dtype=np.int64)
    cdef const cnp.int64_t[::1] ln = np.ascontiguousarray(lengths, dtype=np.int64)
    out_arr = np.empty(n_rows, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef Py_ssize_t pos = 0, b = 0, l, idx
    with nogil:
        while pos < n_rows and b < st.shape[0]:
            idx = st[b] % n_rows
            l = ln[b]
            while l > 0 and pos < n_rows:
                out[pos] = idx
                pos += 1
                idx += 1
                if idx == n_rows:
                    idx = 0
                l -= 1
            b += 1
    return out_arr
