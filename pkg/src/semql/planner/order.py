"""Rank ordering of independent conjuncts."""

from __future__ import annotations

from typing import Sequence

from semql.planner.cost import PredicateProfile


def sort_key(p: PredicateProfile) -> tuple:
    return (p.rank, int(p.kind), p.pred_id)


def order_predicates(profiles: Sequence[PredicateProfile]) -> list[PredicateProfile]:
    """Ascending ``cost / (1 - selectivity)``; cheap kinds, then lower ids, win ties."""
    return sorted(profiles, key=sort_key)
