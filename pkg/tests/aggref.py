"""Straight-line token-count simulation of the hierarchical aggregation fold."""

from semql.models import Task

E, C, SUM, FAST = Task.EXTRACT, Task.COMBINE, Task.SUMMARIZE, Task.FAST_AGGREGATE


def reference(sizes, batch, out):
    """Token-count simulation of the fold: returns [(task, n_inputs)]."""
    trace = []
    if not sizes:
        return trace
    R, S = [], []

    def combine():
        m, total = 0, 0
        while m < len(S) and total + S[m] <= batch:
            total += S[m]
            m += 1
        m = max(m, 2)
        trace.append((C, m))
        del S[:m]
        S.insert(0, out)

    for t in sizes:
        if t > batch:
            if R:
                trace.append((E, len(R)))
                S.append(out)
                R = []
            trace.append((E, 1))
            S.append(out)
        else:
            if sum(R) + t > batch:
                trace.append((E, len(R)))
                S.append(out)
                R = []
            R.append(t)
        while sum(S) > batch and len(S) > 1:
            combine()
    if R and not S:
        trace.append((FAST, len(R)))
        return trace
    if R:
        trace.append((E, len(R)))
        S.append(out)
    while len(S) > 1:
        combine()
    trace.append((SUM, 1))
    return trace
