"""Compare the compiled cascade kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--n 20000] [--repeat 5]

Prints one line per kernel with the best-of-N time for each backend and the
speedup. Results of both backends are checked for agreement first.
"""

from __future__ import annotations

import argparse
import math
import random
import timeit

from semql import _kernels_py

try:
    from semql import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def _inputs(n: int, seed: int):
    rng = random.Random(seed)
    scores = sorted(rng.random() for _ in range(n))
    labels = [1.0 if rng.random() < s else 0.0 for s in scores]
    weights = [1.0 / (0.01 + rng.random()) for _ in range(n)]
    q = [rng.random() + 1e-3 for _ in range(n)]
    total = sum(q)
    q = [x / total for x in q]
    u = [rng.random() for _ in range(n)]
    return scores, labels, weights, q, u


def _close(a, b) -> bool:
    return all(
        (math.isinf(x) and math.isinf(y)) or math.isclose(x, y, rel_tol=1e-9, abs_tol=1e-12) for x, y in zip(a, b)
    )


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    scores, labels, weights, q, u = _inputs(args.n, args.seed)
    k = max(1, args.n // 5)
    cases = {
        "bound_scan": lambda m: m.bound_scan(scores, labels, weights, 0.025),
        "inclusion_probabilities": lambda m: m.inclusion_probabilities(q, k),
        "order_sample": lambda m: m.order_sample(u, [min(1.0, x * k) for x in q], k),
    }
    if _compiled is None:
        print("compiled extension not built; only the Python fallback is timed")
    print(f"{'kernel':<26}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in cases.items():
        py_out = fn(_kernels_py)
        py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1000
        if _compiled is None:
            print(f"{name:<26}{py:>12.2f}{'-':>12}{'-':>10}")
            continue
        c_out = fn(_compiled)
        if name == "bound_scan":
            agree = _close(py_out[0], c_out[0]) and _close(py_out[1], c_out[1])
        elif name == "order_sample":
            agree = list(py_out) == list(c_out)
        else:
            agree = _close(py_out, c_out)
        if not agree:
            raise SystemExit(f"{name}: backends disagree")
        cy = min(timeit.repeat(lambda: fn(_compiled), number=1, repeat=args.repeat)) * 1000
        print(f"{name:<26}{py:>12.2f}{cy:>12.2f}{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
