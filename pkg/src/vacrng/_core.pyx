# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_pycore.py`` for the reference semantics."""

import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport fabs, floor, nearbyint
from libc.stdint cimport int32_t, int64_t, uint8_t, uint32_t, uint64_t
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal
from scipy.special.cython_special cimport ndtr

NAME = "cython"


def classify(x, double inv_sigma, int n, double delta, bint gray):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t size = xv.shape[0], i
    codes = np.empty(size, dtype=np.uint32)
    accepted = np.empty(size, dtype=np.uint8)
    cdef uint32_t[::1] cv = codes
    cdef uint8_t[::1] av = accepted
    cdef double N = <double>(1 << n)
    cdef double y, yN, k
    cdef uint32_t idx
    cdef uint32_t top = (1 << n) - 1
    with nogil:
        for i in range(size):
            y = ndtr(xv[i] * inv_sigma)
            yN = y * N
            idx = <uint32_t>floor(yN) if yN < N else top
            av[i] = 1
            if delta > 0:
                # nearest internal boundary; outer edges 0 and 1 never reject
                k = nearbyint(yN)
                if k < 1:
                    k = 1
                elif k > N - 1:
                    k = N - 1
                if fabs(y - k / N) < delta:
                    av[i] = 0
            if gray:
                idx = idx ^ (idx >> 1)
            cv[i] = idx
    return codes, accepted


cdef inline Py_ssize_t _emit(uint64_t *acc, int *nb, uint32_t val, int k,
                             uint8_t *out, Py_ssize_t o) noexcept nogil:
    acc[0] = (acc[0] << k) | val
    nb[0] += k
    while nb[0] >= 8:
        nb[0] -= 8
        out[o] = <uint8_t>((acc[0] >> nb[0]) & 0xFF)
        o += 1
    acc[0] &= (<uint64_t>1 << nb[0]) - 1
    return o


def pack(vals, accepted, int k, uint64_t carry_value=0, int carry_bits=0):
    cdef const uint32_t[::1] vv = np.ascontiguousarray(vals, dtype=np.uint32)
    cdef Py_ssize_t size = vv.shape[0], i, o = 0
    cdef const uint8_t[::1] av
    cdef bint use_mask = accepted is not None
    if use_mask:
        av = np.ascontiguousarray(accepted, dtype=np.uint8)
    out = np.empty((size * k + carry_bits) // 8 + 1, dtype=np.uint8)
    cdef uint8_t[::1] ov = out
    cdef uint64_t acc = carry_value
    cdef int nb = carry_bits
    with nogil:
        for i in range(size):
            if use_mask and not av[i]:
                continue
            o = _emit(&acc, &nb, vv[i], k, &ov[0], o)
    return out[:o], int(acc), nb


def lut_pack(codes, Py_ssize_t offset, lut_val, lut_acc, int k,
             uint64_t carry_value=0, int carry_bits=0):
    cdef const int32_t[::1] cv = np.ascontiguousarray(codes, dtype=np.int32)
    cdef const uint32_t[::1] lv = lut_val
    cdef const uint8_t[::1] la = lut_acc
    cdef Py_ssize_t size = cv.shape[0], i, j, o = 0, n_acc = 0
    out = np.empty((size * k + carry_bits) // 8 + 1, dtype=np.uint8)
    cdef uint8_t[::1] ov = out
    cdef uint64_t acc = carry_value
    cdef int nb = carry_bits
    with nogil:
        if k == 8 and nb == 0:
            for i in range(size):
                j = cv[i] + offset
                if la[j]:
                    ov[o] = <uint8_t>lv[j]
                    o += 1
            n_acc = o
        else:
            for i in range(size):
                j = cv[i] + offset
                if la[j]:
                    n_acc += 1
                    o = _emit(&acc, &nb, lv[j], k, &ov[0], o)
    return out[:o], int(acc), nb, n_acc


def simulate_codes(bitgen, Py_ssize_t count, double sigma, double step,
                   int64_t lo, int64_t hi):
    cdef bitgen_t *rng = <bitgen_t *>PyCapsule_GetPointer(bitgen.capsule, "BitGenerator")
    codes = np.empty(count, dtype=np.int32)
    cdef int32_t[::1] cv = codes
    cdef Py_ssize_t i
    cdef double c
    with bitgen.lock, nogil:
        for i in range(count):
            c = nearbyint((sigma * random_standard_normal(rng)) / step)
            if c < lo:
                c = lo
            elif c > hi:
                c = hi
            cv[i] = <int32_t>c
    return codes
