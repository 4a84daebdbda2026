# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels (simulation by thinning, excitation sums).

Same algorithms and draw order as ``_pycore``; the GIL is released inside
every loop so replicates can run on several threads.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, log, log1p, nextafter, INFINITY
from libc.stdlib cimport malloc, realloc, free
from numpy.random cimport bitgen_t

import numpy as np

BACKEND = "cython"


cdef struct Buf:
    double* data
    Py_ssize_t n
    Py_ssize_t cap


cdef int buf_init(Buf* b) noexcept nogil:
    b.n = 0
    b.cap = 1024
    b.data = <double*>malloc(b.cap * sizeof(double))
    return 0 if b.data != NULL else -1


cdef int buf_push(Buf* b, double* t) noexcept nogil:
    cdef double* grown
    if b.n > 0 and t[0] <= b.data[b.n - 1]:
        t[0] = nextafter(b.data[b.n - 1], INFINITY)
    elif b.n == 0 and t[0] <= 0.0:
        t[0] = nextafter(0.0, INFINITY)
    if b.n == b.cap:
        grown = <double*>realloc(b.data, 2 * b.cap * sizeof(double))
        if grown == NULL:
            return -1
        b.data = grown
        b.cap *= 2
    b.data[b.n] = t[0]
    b.n += 1
    return 0


cdef object buf_finish(Buf* b, int status):
    if status != 0:
        free(b.data)
        b.data = NULL
        raise MemoryError("event buffer allocation failed")
    out = np.empty(b.n, dtype=np.float64)
    cdef double[::1] view = out
    cdef Py_ssize_t i
    for i in range(b.n):
        view[i] = b.data[i]
    free(b.data)
    b.data = NULL
    return out


cdef bitgen_t* get_bitgen(object bitgen) except NULL:
    capsule = bitgen.capsule
    return <bitgen_t*>PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double uniform(bitgen_t* rng) noexcept nogil:
    return rng.next_double(rng.state)


# step kernels: knots[0..m], values[0..m-1], hmax = suffix maxima of values

cdef inline Py_ssize_t seg_index(const double* knots, Py_ssize_t nk, double tau) noexcept nogil:
    # bisect_right(knots, tau) - 1
    cdef Py_ssize_t lo = 0, hi = nk, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if tau < knots[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo - 1


cdef inline double step_h(const double* knots, const double* values, Py_ssize_t nv,
                          double tau) noexcept nogil:
    cdef Py_ssize_t k = seg_index(knots, nv + 1, tau)
    if k < 0 or k >= nv:
        return 0.0
    return values[k]


cdef inline double step_hmax(const double* knots, const double* hmax, Py_ssize_t nv,
                             double tau) noexcept nogil:
    cdef Py_ssize_t k = seg_index(knots, nv + 1, tau)
    if k >= nv:
        return 0.0
    if k < 0:
        return hmax[0]
    return hmax[k]


cdef tuple step_tables(knots, values):
    k = np.ascontiguousarray(knots, dtype=np.float64)
    v = np.ascontiguousarray(values, dtype=np.float64)
    if k.shape[0] != v.shape[0] + 1 or v.shape[0] == 0:
        raise ValueError("step kernel needs len(knots) == len(values) + 1 >= 2")
    h = np.maximum.accumulate(v[::-1])[::-1].copy()
    return k, v, h


def simulate_poisson(bitgen, double rate, double horizon):
    cdef bitgen_t* rng = get_bitgen(bitgen)
    cdef Buf b
    cdef double t = 0.0
    cdef int status = buf_init(&b)
    with nogil:
        while status == 0:
            t += -log1p(-uniform(rng)) / rate
            if t > horizon:
                break
            status = buf_push(&b, &t)
    return buf_finish(&b, status)


def simulate_exp(bitgen, double s, double alpha, double gamma, double horizon):
    cdef bitgen_t* rng = get_bitgen(bitgen)
    cdef Buf b
    cdef double t = 0.0, excess = 0.0, bound, w
    cdef int status = buf_init(&b)
    with nogil:
        while status == 0:
            bound = s + excess
            w = -log1p(-uniform(rng)) / bound
            t += w
            if t > horizon:
                break
            excess *= exp(-gamma * w)
            if uniform(rng) * bound <= s + excess:
                status = buf_push(&b, &t)
                excess += alpha
    return buf_finish(&b, status)


def simulate_exp_exact(bitgen, double s, double alpha, double gamma, double horizon):
    cdef bitgen_t* rng = get_bitgen(bitgen)
    cdef Buf b
    cdef double t = 0.0, excess = 0.0, w, u, d, w2
    cdef int status = buf_init(&b)
    with nogil:
        while status == 0:
            w = -log1p(-uniform(rng)) / s
            u = uniform(rng)
            if excess > 0.0:
                d = 1.0 + gamma * log1p(-u) / excess
                if d > 0.0:
                    w2 = -log(d) / gamma
                    if w2 < w:
                        w = w2
            t += w
            if t > horizon:
                break
            status = buf_push(&b, &t)
            excess = excess * exp(-gamma * w) + alpha
    return buf_finish(&b, status)


def simulate_step(bitgen, double s, knots, values, double horizon):
    k_arr, v_arr, h_arr = step_tables(knots, values)
    cdef const double[::1] kv = k_arr
    cdef const double[::1] vv = v_arr
    cdef const double[::1] hv = h_arr
    cdef Py_ssize_t nv = vv.shape[0]
    cdef double reach = kv[nv]
    cdef bitgen_t* rng = get_bitgen(bitgen)
    cdef Buf b
    cdef Py_ssize_t lo = 0, i
    cdef double t = 0.0, bound, lam
    cdef int status = buf_init(&b)
    with nogil:
        while status == 0:
            while lo < b.n and t - b.data[lo] >= reach:
                lo += 1
            bound = s
            for i in range(lo, b.n):
                bound += step_hmax(&kv[0], &hv[0], nv, t - b.data[i])
            t += -log1p(-uniform(rng)) / bound
            if t > horizon:
                break
            while lo < b.n and t - b.data[lo] >= reach:
                lo += 1
            lam = s
            for i in range(lo, b.n):
                lam += step_h(&kv[0], &vv[0], nv, t - b.data[i])
            if uniform(rng) * bound <= lam:
                status = buf_push(&b, &t)
    return buf_finish(&b, status)


def simulate_driven_exp(bitgen, double s, double alpha, double gamma, source, double horizon):
    src_arr = np.ascontiguousarray(source, dtype=np.float64)
    cdef const double[::1] src = src_arr
    cdef Py_ssize_t ns = src.shape[0], j = 0
    cdef bitgen_t* rng = get_bitgen(bitgen)
    cdef Buf b
    cdef double t = 0.0, excess = 0.0, bound, cand, nxt
    cdef int status = buf_init(&b)
    with nogil:
        while status == 0:
            nxt = src[j] if j < ns else INFINITY
            bound = s + excess
            cand = t + -log1p(-uniform(rng)) / bound
            if cand >= nxt:
                excess = excess * exp(-gamma * (nxt - t)) + alpha
                t = nxt
                j += 1
                continue
            if cand > horizon:
                break
            excess *= exp(-gamma * (cand - t))
            t = cand
            if uniform(rng) * bound <= s + excess:
                status = buf_push(&b, &t)
    return buf_finish(&b, status)


def simulate_driven_step(bitgen, double s, knots, values, source, double horizon):
    k_arr, v_arr, h_arr = step_tables(knots, values)
    cdef const double[::1] kv = k_arr
    cdef const double[::1] vv = v_arr
    cdef const double[::1] hv = h_arr
    cdef Py_ssize_t nv = vv.shape[0]
    cdef double reach = kv[nv]
    src_arr = np.ascontiguousarray(source, dtype=np.float64)
    cdef const double[::1] src = src_arr
    cdef Py_ssize_t ns = src.shape[0], j = 0, lo = 0, i
    cdef bitgen_t* rng = get_bitgen(bitgen)
    cdef Buf b
    cdef double t = 0.0, bound, cand, nxt, lam
    cdef int status = buf_init(&b)
    with nogil:
        while status == 0:
            nxt = src[j] if j < ns else INFINITY
            while lo < j and t - src[lo] >= reach:
                lo += 1
            bound = s
            for i in range(lo, j):
                bound += step_hmax(&kv[0], &hv[0], nv, t - src[i])
            cand = t + -log1p(-uniform(rng)) / bound
            if cand >= nxt:
                t = nxt
                j += 1
                continue
            if cand > horizon:
                break
            t = cand
            while lo < j and t - src[lo] >= reach:
                lo += 1
            lam = s
            for i in range(lo, j):
                lam += step_h(&kv[0], &vv[0], nv, t - src[i])
            if uniform(rng) * bound <= lam:
                status = buf_push(&b, &t)
    return buf_finish(&b, status)


def excite_exp(source, query, double alpha, double gamma):
    src_arr = np.ascontiguousarray(source, dtype=np.float64)
    q_arr = np.ascontiguousarray(query, dtype=np.float64)
    cdef const double[::1] src = src_arr
    cdef const double[::1] q = q_arr
    out = np.empty(q.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t ns = src.shape[0], i = 0, k
    cdef double acc = 0.0, t_acc = 0.0
    with nogil:
        for k in range(q.shape[0]):
            while i < ns and src[i] < q[k]:
                acc = acc * exp(-gamma * (src[i] - t_acc)) + alpha
                t_acc = src[i]
                i += 1
            o[k] = acc * exp(-gamma * (q[k] - t_acc))
    return out


def excite_step(source, query, knots, values):
    k_arr, v_arr, _ = step_tables(knots, values)
    cdef const double[::1] kv = k_arr
    cdef const double[::1] vv = v_arr
    cdef Py_ssize_t nv = vv.shape[0]
    cdef double reach = kv[nv]
    src_arr = np.ascontiguousarray(source, dtype=np.float64)
    q_arr = np.ascontiguousarray(query, dtype=np.float64)
    cdef const double[::1] src = src_arr
    cdef const double[::1] q = q_arr
    out = np.empty(q.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t ns = src.shape[0], lo = 0, hi = 0, i, k
    cdef double acc
    with nogil:
        for k in range(q.shape[0]):
            while hi < ns and src[hi] < q[k]:
                hi += 1
            while lo < hi and q[k] - src[lo] >= reach:
                lo += 1
            acc = 0.0
            for i in range(lo, hi):
                acc += step_h(&kv[0], &vv[0], nv, q[k] - src[i])
            o[k] = acc
    return out
