# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops; signatures mirror ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, floor, ceil

cnp.import_array()


def fuse_sources(double[::1] tx, double[::1] ty, double[::1] conf,
                 double[::1] sigma, int width, int height, double truncation):
    cdef Py_ssize_t n = tx.shape[0]
    out_arr = np.zeros((height, width), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i
    cdef int x, y, x0, x1, y0, y1
    cdef double c, s, r, r2, dx, dy, d2, denom
    with nogil:
        for i in range(n):
            c = conf[i]
            if c == 0.0:
                continue
            s = sigma[i]
            r = truncation * s
            r2 = r * r
            denom = 2.0 * s * s
            x0 = <int>ceil(tx[i] - r)
            x1 = <int>floor(tx[i] + r)
            y0 = <int>ceil(ty[i] - r)
            y1 = <int>floor(ty[i] + r)
            if x0 < 0:
                x0 = 0
            if y0 < 0:
                y0 = 0
            if x1 > width - 1:
                x1 = width - 1
            if y1 > height - 1:
                y1 = height - 1
            for y in range(y0, y1 + 1):
                dy = y - ty[i]
                for x in range(x0, x1 + 1):
                    dx = x - tx[i]
                    d2 = dx * dx + dy * dy
                    if d2 <= r2:
                        out[y, x] += c * exp(-d2 / denom)
    return out_arr


def assign_nearest(double[::1] ex, double[::1] ey, double[::1] cx, double[::1] cy):
    cdef Py_ssize_t n = ex.shape[0], m = cx.shape[0]
    out_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef Py_ssize_t i, j, best_j
    cdef double dx, dy, d2, best
    with nogil:
        for i in range(n):
            best = 1e300
            best_j = 0
            for j in range(m):
                dx = cx[j] - ex[i]
                dy = cy[j] - ey[i]
                d2 = dx * dx + dy * dy
                if d2 < best:
                    best = d2
                    best_j = j
            out[i] = best_j
    return out_arr
