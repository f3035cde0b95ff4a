"""Concentration bounds for importance-weighted proportions.

Everything that depends on the choice of inequality lives here, so an
alternative bound only needs a new radius function.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

from semql import kernels


def bernstein_radius(variance: float, n: float, delta: float) -> float:
    return kernels.eb_radius(variance, n, delta)


def hoeffding_radius(variance: float, n: float, delta: float) -> float:
    if n <= 0:
        return math.inf
    return math.sqrt(math.log(1.0 / delta) / (2.0 * n))


RADII: dict[str, Callable[[float, float, float], float]] = {
    "bernstein": bernstein_radius,
    "hoeffding": hoeffding_radius,
}


def effective_sample_size(weights: Sequence[float]) -> float:
    s = sum(weights)
    s2 = sum(w * w for w in weights)
    return s * s / s2 if s2 > 0 else 0.0


def weighted_lower_bound(labels: Sequence[float], weights: Sequence[float], delta: float, bound: str = "bernstein") -> float:
    """Lower confidence bound on the weighted mean of 0/1 ``labels``."""
    sw = sum(weights)
    if sw <= 0:
        return -math.inf
    p = min(1.0, max(0.0, sum(w * y for w, y in zip(weights, labels)) / sw))
    n = effective_sample_size(weights)
    if n <= 1.0:
        return -math.inf
    var = p * (1.0 - p) * n / (n - 1.0)
    return p - RADII[bound](var, n, delta)


def threshold_bounds(scores, labels, weights, delta: float, bound: str = "bernstein"):
    """Lower bounds on precision above and NPV below each sorted score.

    The empirical-Bernstein case runs in the compiled kernel when present.
    """
    if bound == "bernstein":
        return kernels.bound_scan(scores, labels, weights, delta)
    n = len(scores)
    lb_pos, lb_neg = [], []
    for i in range(n):
        above = [j for j in range(n) if scores[j] > scores[i]]
        below = [j for j in range(n) if scores[j] < scores[i]]
        lb_pos.append(weighted_lower_bound([labels[j] for j in above], [weights[j] for j in above], delta, bound))
        lb_neg.append(weighted_lower_bound([1 - labels[j] for j in below], [weights[j] for j in below], delta, bound))
    return lb_pos, lb_neg
