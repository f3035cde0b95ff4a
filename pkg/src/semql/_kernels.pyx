# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled cascade kernels; same contract as ``semql._kernels_py``."""

from libc.math cimport log, sqrt, INFINITY


cpdef double eb_radius(double variance, double n, double delta):
    cdef double log_term
    if n <= 1.0:
        return INFINITY
    log_term = log(2.0 / delta)
    return sqrt(2.0 * variance * log_term / n) + 7.0 * log_term / (3.0 * (n - 1.0))


cdef inline double _lower_bound(double sw, double swy, double sw2, double delta):
    cdef double p, n, var
    if sw <= 0.0 or sw2 <= 0.0:
        return -INFINITY
    p = swy / sw
    # prefix-sum differences can drift just outside [0, 1]
    p = min(1.0, max(0.0, p))
    n = sw * sw / sw2
    if n <= 1.0:
        return -INFINITY
    var = p * (1.0 - p) * n / (n - 1.0)
    return p - eb_radius(var, n, delta)


def bound_scan(scores, labels, weights, double delta):
    cdef Py_ssize_t n = len(scores)
    cdef double[::1] s = memoryview_of(scores)
    cdef double[::1] y = memoryview_of(labels)
    cdef double[::1] w = memoryview_of(weights)
    cdef double[::1] pw = memoryview_zeros(n + 1)
    cdef double[::1] pwy = memoryview_zeros(n + 1)
    cdef double[::1] pw2 = memoryview_zeros(n + 1)
    cdef Py_ssize_t i, lo = 0, hi = 0
    cdef double sv, sw
    for i in range(n):
        pw[i + 1] = pw[i] + w[i]
        pwy[i + 1] = pwy[i] + w[i] * y[i]
        pw2[i + 1] = pw2[i] + w[i] * w[i]
    lb_pos = [0.0] * n
    lb_neg = [0.0] * n
    for i in range(n):
        sv = s[i]
        while lo < n and s[lo] < sv:
            lo += 1
        if hi < i:
            hi = i
        while hi < n and s[hi] <= sv:
            hi += 1
        sw = pw[n] - pw[hi]
        lb_pos[i] = _lower_bound(sw, pwy[n] - pwy[hi], pw2[n] - pw2[hi], delta)
        sw = pw[lo]
        lb_neg[i] = _lower_bound(sw, sw - pwy[lo], pw2[lo], delta)
    return lb_pos, lb_neg


def inclusion_probabilities(q, Py_ssize_t k):
    cdef Py_ssize_t n = len(q)
    cdef double[::1] qv = memoryview_of(q)
    cdef Py_ssize_t i, n_capped, positive = 0
    cdef double free_mass, c = 0.0
    cdef bint changed
    if k <= 0 or n == 0:
        return [0.0] * n
    for i in range(n):
        if qv[i] > 0.0:
            positive += 1
    if k >= positive:
        return [1.0 if qv[i] > 0.0 else 0.0 for i in range(n)]
    cdef unsigned char[::1] capped = bytearray(n)
    while True:
        free_mass = 0.0
        n_capped = 0
        for i in range(n):
            if capped[i]:
                n_capped += 1
            else:
                free_mass += qv[i]
        c = (k - n_capped) / free_mass
        changed = False
        for i in range(n):
            if not capped[i] and c * qv[i] >= 1.0:
                capped[i] = 1
                changed = True
        if not changed:
            break
    return [1.0 if capped[i] else c * qv[i] for i in range(n)]


def order_sample(u, lam, Py_ssize_t k):
    cdef Py_ssize_t n = len(u)
    cdef double[::1] uv = memoryview_of(u)
    cdef double[::1] lv = memoryview_of(lam)
    cdef Py_ssize_t i
    keys = []
    for i in range(n):
        if lv[i] > 0.0:
            keys.append((uv[i] / lv[i], i))
    keys.sort()
    return [t[1] for t in keys[:k]]


cdef double[::1] memoryview_of(seq):
    from array import array
    return array("d", seq)


cdef double[::1] memoryview_zeros(Py_ssize_t n):
    from array import array
    return array("d", bytes(8 * n))
