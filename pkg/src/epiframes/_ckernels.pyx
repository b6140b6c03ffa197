# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Each function mirrors one in ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor
from libc.stdlib cimport malloc, free

cnp.import_array()


def floyd_sample(const cnp.int64_t[:] pool_sizes,
                 const cnp.int64_t[:] sizes,
                 const double[:] uniforms):
    cdef Py_ssize_t n_groups = pool_sizes.shape[0]
    cdef Py_ssize_t total = 0
    cdef Py_ssize_t g, i, q, start
    cdef cnp.int64_t n, s, j, t
    cdef bint dup
    for g in range(n_groups):
        total += sizes[g]
    out_arr = np.empty(total, dtype=np.int64)
    cdef cnp.int64_t[:] out = out_arr
    start = 0
    for g in range(n_groups):
        n = pool_sizes[g]
        s = sizes[g]
        for i in range(s):
            j = n - s + i
            t = <cnp.int64_t>floor(uniforms[start + i] * (j + 1))
            dup = False
            for q in range(i):
                if out[start + q] == t:
                    dup = True
                    break
            out[start + i] = j if dup else t
        start += s
    return out_arr


def contagion(const cnp.int64_t[:] ptr,
              const cnp.int64_t[:] participants,
              const cnp.uint8_t[:] is_source,
              cnp.int8_t[:] state,
              const double[:] keys,
              Py_ssize_t infections_per_meeting,
              cnp.int8_t susceptible,
              cnp.int8_t exposed):
    cdef Py_ssize_t n_meet = ptr.shape[0] - 1
    cdef Py_ssize_t m, a, b, i, q, n_sus, take, best
    cdef bint has_source
    cdef Py_ssize_t cap = participants.shape[0]
    cdef Py_ssize_t *cand = <Py_ssize_t *>malloc((cap + 1) * sizeof(Py_ssize_t))
    out = []
    try:
        for m in range(n_meet):
            a = ptr[m]
            b = ptr[m + 1]
            has_source = False
            for i in range(a, b):
                if is_source[participants[i]]:
                    has_source = True
                    break
            if not has_source:
                continue
            n_sus = 0
            for i in range(a, b):
                if state[participants[i]] == susceptible:
                    cand[n_sus] = i
                    n_sus += 1
            take = infections_per_meeting if infections_per_meeting < n_sus else n_sus
            # partial selection sort on (key, slot position)
            for q in range(take):
                best = q
                for i in range(q + 1, n_sus):
                    if keys[cand[i]] < keys[cand[best]] or (
                            keys[cand[i]] == keys[cand[best]] and cand[i] < cand[best]):
                        best = i
                cand[q], cand[best] = cand[best], cand[q]
                state[participants[cand[q]]] = exposed
                out.append(participants[cand[q]])
    finally:
        free(cand)
    return np.asarray(out, dtype=np.int64)


def select_by_keys(const cnp.int64_t[:] ptr,
                   const double[:] keys,
                   const cnp.int64_t[:] take):
    cdef Py_ssize_t n_seg = ptr.shape[0] - 1
    cdef Py_ssize_t s, a, b, i, q, best, n
    cdef Py_ssize_t cap = keys.shape[0]
    mask_arr = np.zeros(cap, dtype=np.bool_)
    cdef cnp.uint8_t[:] mask = mask_arr.view(np.uint8)
    cdef Py_ssize_t *idx = <Py_ssize_t *>malloc((cap + 1) * sizeof(Py_ssize_t))
    try:
        for s in range(n_seg):
            a = ptr[s]
            b = ptr[s + 1]
            n = b - a
            if take[s] >= n:
                for i in range(a, b):
                    mask[i] = 1
                continue
            for i in range(n):
                idx[i] = a + i
            for q in range(take[s]):
                best = q
                for i in range(q + 1, n):
                    if keys[idx[i]] < keys[idx[best]] or (
                            keys[idx[i]] == keys[idx[best]] and idx[i] < idx[best]):
                        best = i
                idx[q], idx[best] = idx[best], idx[q]
                mask[idx[q]] = 1
    finally:
        free(idx)
    return mask_arr


def segment_sums(const cnp.int64_t[:] ptr, const double[:] values):
    cdef Py_ssize_t n_seg = ptr.shape[0] - 1
    cdef Py_ssize_t s, i
    cdef double acc
    out_arr = np.zeros(n_seg, dtype=np.float64)
    cdef double[:] out = out_arr
    for s in range(n_seg):
        acc = 0.0
        for i in range(ptr[s], ptr[s + 1]):
            acc += values[i]
        out[s] = acc
    return out_arr
