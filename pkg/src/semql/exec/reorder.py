"""Runtime conjunct reordering from a sliding window of batch observations."""

from __future__ import annotations

from collections import deque
from dataclasses import replace
from typing import Mapping, Sequence

from semql.planner.cost import Observed, PredicateProfile, expected_cost
from semql.planner.order import order_predicates

DEFAULT_WINDOW = 10
DEFAULT_MIN_ROWS = 10
DEFAULT_HYSTERESIS = 0.1


def observed_profiles(
    profiles: Sequence[PredicateProfile],
    window: Sequence[Mapping[int, Observed]],
    min_rows: int = DEFAULT_MIN_ROWS,
) -> list[PredicateProfile]:
    """Replace estimated selectivities with the windowed observations.

    A predicate seen on fewer than ``min_rows`` rows keeps its prior.
    Cost stays the planner's per-row cost so cheap and AI predicates remain
    comparable.
    """
    out = []
    for p in profiles:
        seen = sum(w[p.pred_id].rows_seen for w in window if p.pred_id in w)
        passed = sum(w[p.pred_id].rows_passed for w in window if p.pred_id in w)
        if seen >= max(1, min_rows):
            p = replace(p, est_selectivity=passed / seen, observed=Observed(seen, passed))
        out.append(p)
    return out


def adaptive_reorder(
    profiles: Sequence[PredicateProfile],
    window_stats: Sequence[Mapping[int, Observed]],
    current: Sequence[int] | None = None,
    hysteresis: float = DEFAULT_HYSTERESIS,
    min_rows: int = DEFAULT_MIN_ROWS,
) -> list[int]:
    """Pred-id order to use for the next batch.

    The rank order is adopted only when its expected per-row cost beats the
    current order's by at least ``hysteresis`` (relative), so equal
    profiles never cause flapping.
    """
    ids = list(current) if current is not None else [p.pred_id for p in profiles]
    if len(profiles) < 2:
        return ids
    updated = observed_profiles(profiles, window_stats, min_rows)
    by_id = {p.pred_id: p for p in updated}
    candidate = [p.pred_id for p in order_predicates(updated)]
    if candidate == ids:
        return ids
    now = expected_cost([by_id[i] for i in ids])
    new = expected_cost([by_id[i] for i in candidate])
    if new <= (1.0 - hysteresis) * now:
        return candidate
    return ids


class AdaptiveOrder:
    """Per-chain reordering state; the order only changes between batches."""

    def __init__(
        self,
        profiles: Sequence[PredicateProfile],
        window: int = DEFAULT_WINDOW,
        hysteresis: float = DEFAULT_HYSTERESIS,
        min_rows: int = DEFAULT_MIN_ROWS,
    ):
        self.profiles = list(profiles)
        self.order = [p.pred_id for p in self.profiles]
        self.window: deque[dict[int, Observed]] = deque(maxlen=window)
        self.hysteresis = hysteresis
        self.min_rows = min_rows
        self.flips = 0
        self.history: list[list[int]] = [list(self.order)]

    def observe(self, batch: Mapping[int, tuple[int, int]]) -> list[int]:
        """Record one batch of ``pred_id -> (seen, passed)`` and return the next order."""
        self.window.append({k: Observed(s, p) for k, (s, p) in batch.items()})
        new = adaptive_reorder(self.profiles, list(self.window), self.order, self.hysteresis, self.min_rows)
        if new != self.order:
            self.flips += 1
            self.order = new
        self.history.append(list(self.order))
        return self.order
