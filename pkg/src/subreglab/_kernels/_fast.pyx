# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled backend for the sweep kernels; mirrors ``_pure`` exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs, pow

cnp.import_array()

NAME = "fast"


def dist_many_points(ps, cnp.float64_t[::1] los, cnp.float64_t[::1] his):
    cdef cnp.float64_t[::1] pv = np.ascontiguousarray(ps, dtype=np.float64)
    cdef Py_ssize_t n = pv.shape[0], m = los.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double p, best, gap
    if m == 0:
        out_arr.fill(np.inf)
        return out_arr
    for i in range(n):
        p = pv[i]
        best = INFINITY
        for j in range(m):
            gap = los[j] - p
            if p - his[j] > gap:
                gap = p - his[j]
            if gap < best:
                best = gap
        out[i] = best if best > 0.0 else 0.0
    return out_arr


def dist_packed(double p, cnp.int64_t[::1] starts, cnp.int64_t[::1] counts,
                cnp.float64_t[::1] los, cnp.float64_t[::1] his):
    cdef Py_ssize_t n = counts.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef Py_ssize_t i, j, s, c
    cdef double best, gap
    for i in range(n):
        c = counts[i]
        if c == 0:
            out[i] = INFINITY
            continue
        s = starts[i]
        best = INFINITY
        for j in range(s, s + c):
            gap = los[j] - p
            if p - his[j] > gap:
                gap = p - his[j]
            if gap < best:
                best = gap
        out[i] = best if best > 0.0 else 0.0
    return out_arr


def max_ratio(cnp.float64_t[::1] xs, cnp.float64_t[::1] nums,
              cnp.float64_t[::1] dens, double q, double center):
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t i, best = 0
    cdef int nviol = 0
    cdef double r, off, best_r = -INFINITY, best_off = INFINITY, best_x = INFINITY
    cdef bint take
    for i in range(n):
        if dens[i] == 0.0:
            if nums[i] > 0.0:
                r = INFINITY
                nviol += 1
            else:
                r = 0.0
        else:
            r = nums[i] / pow(dens[i], q)
        off = fabs(xs[i] - center)
        take = False
        if r > best_r:
            take = True
        elif r == best_r:
            if off < best_off or (off == best_off and xs[i] < best_x):
                take = True
        if take:
            best_r = r
            best_off = off
            best_x = xs[i]
            best = i
    return best_r, best, nviol
