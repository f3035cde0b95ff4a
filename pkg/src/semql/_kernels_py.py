"""Pure-Python cascade kernels. ``semql._kernels`` is a compiled drop-in."""

from __future__ import annotations

import math


def eb_radius(variance: float, n: float, delta: float) -> float:
    """One-sided empirical Bernstein radius; infinite when n <= 1."""
    if n <= 1.0:
        return math.inf
    log_term = math.log(2.0 / delta)
    return math.sqrt(2.0 * variance * log_term / n) + 7.0 * log_term / (3.0 * (n - 1.0))


def _lower_bound(sw: float, swy: float, sw2: float, delta: float) -> float:
    if sw <= 0.0 or sw2 <= 0.0:
        return -math.inf
    p = swy / sw
    # prefix-sum differences can drift just outside [0, 1]
    p = min(1.0, max(0.0, p))
    n = sw * sw / sw2
    if n <= 1.0:
        return -math.inf
    var = p * (1.0 - p) * n / (n - 1.0)
    return p - eb_radius(var, n, delta)


def bound_scan(scores, labels, weights, delta):
    """Lower confidence bounds at every candidate threshold ``t = scores[i]``.

    ``scores`` must be sorted ascending. For index i, ``lb_pos[i]`` bounds the
    weighted precision of samples with score strictly above ``scores[i]``
    and ``lb_neg[i]`` bounds the weighted negative predictive value of
    samples strictly below it. Empty sets give ``-inf``.
    """
    n = len(scores)
    pw = [0.0] * (n + 1)
    pwy = [0.0] * (n + 1)
    pw2 = [0.0] * (n + 1)
    for i in range(n):
        w = weights[i]
        pw[i + 1] = pw[i] + w
        pwy[i + 1] = pwy[i] + w * labels[i]
        pw2[i + 1] = pw2[i] + w * w
    lb_pos = [0.0] * n
    lb_neg = [0.0] * n
    lo = 0
    hi = 0
    for i in range(n):
        s = scores[i]
        while lo < n and scores[lo] < s:
            lo += 1
        if hi < i:
            hi = i
        while hi < n and scores[hi] <= s:
            hi += 1
        sw = pw[n] - pw[hi]
        lb_pos[i] = _lower_bound(sw, pwy[n] - pwy[hi], pw2[n] - pw2[hi], delta)
        sw = pw[lo]
        lb_neg[i] = _lower_bound(sw, sw - pwy[lo], pw2[lo], delta)
    return lb_pos, lb_neg


def inclusion_probabilities(q, k):
    """Scale ``q`` to ``k * q`` and cap at 1, redistributing the excess.

    The result sums to ``min(k, count of positive q)`` up to rounding.
    """
    n = len(q)
    lam = [0.0] * n
    if k <= 0 or n == 0:
        return lam
    capped = [False] * n
    positive = sum(1 for x in q if x > 0.0)
    if k >= positive:
        return [1.0 if x > 0.0 else 0.0 for x in q]
    while True:
        free_mass = 0.0
        n_capped = 0
        for i in range(n):
            if capped[i]:
                n_capped += 1
            else:
                free_mass += q[i]
        c = (k - n_capped) / free_mass
        changed = False
        for i in range(n):
            if not capped[i] and c * q[i] >= 1.0:
                capped[i] = True
                changed = True
        if not changed:
            break
    for i in range(n):
        lam[i] = 1.0 if capped[i] else c * q[i]
    return lam


def order_sample(u, lam, k):
    """Indices of the ``k`` smallest keys ``u[i] / lam[i]``, ties by index."""
    keys = []
    for i in range(len(u)):
        if lam[i] > 0.0:
            keys.append((u[i] / lam[i], i))
    keys.sort()
    return [i for _, i in keys[:k]]
