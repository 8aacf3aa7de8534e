# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: linear recursions and the exponential-Euler stepper.

The sine transforms use FFTW's RODFT00 (type-I DST), which matches the
collocation grid ``x_j = j pi / (G + 1)``.  Semantics are identical to
``stochheat._fallback``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isfinite, sqrt, M_PI

cnp.import_array()

NAME = "compiled"

cdef enum:
    STATUS_OK = 0
    STATUS_NONFINITE = 1
    STATUS_ABORT = 2

cdef enum:
    VARIANT_ZERO = 0
    VARIANT_LINEAR = 1
    VARIANT_RATIONAL5 = 2
    VARIANT_CUBIC = 3


cdef extern from "fftw3.h" nogil:
    ctypedef struct fftw_plan_s:
        pass
    ctypedef fftw_plan_s *fftw_plan
    ctypedef int fftw_r2r_kind
    fftw_r2r_kind FFTW_RODFT00
    unsigned FFTW_ESTIMATE
    fftw_plan fftw_plan_r2r_1d(int n, double *inp, double *out,
                               fftw_r2r_kind kind, unsigned flags)
    void fftw_execute(const fftw_plan p)
    void fftw_destroy_plan(fftw_plan p)
    void *fftw_malloc(size_t n)
    void fftw_free(void *p)


def linear_recursion(const double[::1] decay, const double[:, ::1] increments, const double[::1] init):
    cdef Py_ssize_t m = increments.shape[0]
    cdef Py_ssize_t n = increments.shape[1]
    cdef Py_ssize_t i, k
    if decay.shape[0] != n or init.shape[0] != n:
        raise ValueError("decay/init length must match increments columns")
    out_arr = np.empty((m + 1, n))
    cdef double[:, ::1] out = out_arr
    with nogil:
        for k in range(n):
            out[0, k] = init[k]
        for i in range(m):
            for k in range(n):
                out[i + 1, k] = decay[k] * out[i, k] + increments[i, k]
    return out_arr


cdef inline double _drift(int variant, double c, double v) nogil:
    if variant == VARIANT_RATIONAL5:
        return 5.0 * (1.0 - v) / (1.0 + v * v)
    if variant == VARIANT_CUBIC:
        return -(v * v * v)
    if variant == VARIANT_LINEAR:
        return c * v
    return 0.0


def exp_euler(y0, decay, double dt, ou, int grid, int variant, double c,
              double abort_level, func=None):
    if func is not None:
        raise TypeError("compiled kernel supports built-in variants only")
    if variant < VARIANT_ZERO or variant > VARIANT_CUBIC:
        raise ValueError(f"unknown variant code {variant}")
    cdef double[::1] y = np.array(y0, dtype=np.float64)
    cdef const double[::1] d = np.ascontiguousarray(decay, dtype=np.float64)
    cdef const double[:, ::1] o = np.ascontiguousarray(ou, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t steps = o.shape[0] - 1
    if d.shape[0] != n or o.shape[1] < n:
        raise ValueError("decay and ou must cover every mode")
    if grid < n:
        raise ValueError("grid smaller than mode count")
    states_arr = np.zeros((steps + 1, n))
    cdef double[:, ::1] states = states_arr
    cdef double *buf = <double *> fftw_malloc(grid * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef fftw_plan plan = fftw_plan_r2r_1d(grid, buf, buf, FFTW_RODFT00, FFTW_ESTIMATE)
    cdef double norm = sqrt(2.0 / M_PI)
    cdef double to_grid = norm / 2.0
    cdef double to_coeffs = 1.0 / (norm * (grid + 1))
    cdef bint diagonal = variant == VARIANT_ZERO or variant == VARIANT_LINEAR
    cdef int status = STATUS_OK
    cdef double bad = 0.0
    cdef double v, vmax, drift
    cdef Py_ssize_t m, k, j, done = steps
    with nogil:
        for k in range(n):
            states[0, k] = y[k]
        for m in range(steps + 1):
            for k in range(n):
                buf[k] = y[k]
            for j in range(n, grid):
                buf[j] = 0.0
            fftw_execute(plan)
            vmax = 0.0
            for j in range(grid):
                v = buf[j] * to_grid
                if not isfinite(v):
                    vmax = v
                    break
                if fabs(v) > vmax:
                    vmax = fabs(v)
                buf[j] = _drift(variant, c, v)
                if not isfinite(buf[j]):
                    status = STATUS_NONFINITE
                    break
            if not isfinite(vmax):
                status = STATUS_NONFINITE
                bad = vmax
            elif vmax > abort_level:
                status = STATUS_ABORT
                bad = vmax
            if status != STATUS_OK:
                done = m
                break
            if m == steps:
                break
            if not diagonal:
                fftw_execute(plan)
            for k in range(n):
                if variant == VARIANT_LINEAR:
                    drift = c * y[k]
                elif variant == VARIANT_ZERO:
                    drift = 0.0
                else:
                    drift = buf[k] * to_coeffs
                y[k] = d[k] * (y[k] + dt * drift) + (o[m + 1, k] - d[k] * o[m, k])
                states[m + 1, k] = y[k]
    fftw_destroy_plan(plan)
    fftw_free(buf)
    return states_arr, done, status, bad
