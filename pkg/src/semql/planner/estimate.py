"""Cardinality and model-call estimates for every plan node."""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Mapping

from semql.core.values import ColumnRef
from semql.parser import ast as A
from semql.planner.cost import PredicateProfile, StatsView
from semql.planner.plan import (
    LABEL_COLUMN,
    Aggregate,
    Classify,
    Filter,
    Join,
    PlanNode,
    Project,
    Scan,
)

DEFAULT_AGG_BATCH_TOKENS = 3072
MAX_LABELS_PER_CALL = 250


def _r(x: float) -> float:
    # estimates are rounded so that products such as 300 * 0.1 print cleanly
    return round(max(0.0, x), 6)


def join_rows(left_rows: float, right_rows: float, keys, stats: StatsView) -> float:
    """``L * R / max(dL, dR)`` for the most selective equi key; ``L * R`` for a cross join.

    Distinct counts are capped by the input estimates, since a filtered input
    cannot hold more distinct values than rows.
    """
    if not keys:
        return left_rows * right_rows
    divisor = 1.0
    for lk, rk in keys:
        if lk == LABEL_COLUMN:
            # classification output joined back to its label rows
            return left_rows * right_rows / max(1.0, _distinct(rk, right_rows, stats))
        dl = _distinct(lk, left_rows, stats)
        dr = _distinct(rk, right_rows, stats)
        divisor = max(divisor, dl, dr)
    return left_rows * right_rows / divisor


def _distinct(ref: ColumnRef, rows: float, stats: StatsView) -> float:
    if ref == LABEL_COLUMN:
        return rows
    d = stats.distinct(ref)
    return min(float(d), rows) if d is not None else rows


def agg_call_estimate(rows: float, avg_tokens: float, batch_tokens: int) -> float:
    """Rough call count for one group of the hierarchical aggregate."""
    if rows <= 0:
        return 0.0
    total = rows * max(avg_tokens, 1.0)
    if total <= batch_tokens:
        return 1.0
    extracts = math.ceil(total / batch_tokens)
    return extracts + 2.0  # at least one combine and the summarize


class Estimator:
    def __init__(
        self,
        stats: StatsView,
        profiles: Mapping[int, PredicateProfile],
        agg_batch_tokens: int = DEFAULT_AGG_BATCH_TOKENS,
    ):
        self.stats = stats
        self.profiles = profiles
        self.agg_batch_tokens = agg_batch_tokens
        self._memo: dict[int, PlanNode] = {}

    def selectivity(self, pred) -> float:
        return self.profiles[pred.id].est_selectivity

    def __call__(self, node: PlanNode) -> PlanNode:
        key = id(node)
        if key not in self._memo:
            self._memo[key] = self._annotate(node)
        return self._memo[key]

    def _annotate(self, node: PlanNode) -> PlanNode:
        if isinstance(node, Scan):
            if node.table is None:
                rows = 1.0
            else:
                rows = float(self.stats.catalog.stats(node.table).row_count)
            return replace(node, est_rows=rows, est_ai_calls=0.0)
        if isinstance(node, Filter):
            child = self(node.child)
            calls = child.est_rows if node.pred.is_ai else 0.0
            rows = child.est_rows * self.selectivity(node.pred)
            return replace(node, child=child, est_rows=_r(rows), est_ai_calls=_r(calls))
        if isinstance(node, Join):
            left, right = self(node.left), self(node.right)
            pairs = join_rows(left.est_rows, right.est_rows, node.equi_keys, self.stats)
            calls = 0.0
            if node.ai_pred is not None:
                calls = pairs
                pairs *= self.selectivity(node.ai_pred)
            return replace(node, left=left, right=right, est_rows=_r(pairs), est_ai_calls=_r(calls))
        if isinstance(node, Classify):
            child, labels = self(node.child), self(node.labels)
            calls = child.est_rows * node.est_chunks
            distinct = _distinct(node.label_column, labels.est_rows, self.stats)
            sel = self._classify_selectivity(node)
            rows = child.est_rows * distinct * sel
            return replace(node, child=child, labels=labels, est_rows=_r(rows), est_ai_calls=_r(calls))
        if isinstance(node, Project):
            child = self(node.child)
            calls = sum(self._row_calls(e, child.est_rows) for e, _ in node.items)
            return replace(node, child=child, est_rows=child.est_rows, est_ai_calls=_r(calls))
        if isinstance(node, Aggregate):
            child = self(node.child)
            groups = self._groups(node, child.est_rows)
            calls = sum(self._row_calls(e, child.est_rows) for e, _ in node.group_keys)
            per_group = child.est_rows / groups if groups else 0.0
            for e, _ in node.aggs:
                if isinstance(e, A.AiCall):
                    tokens = sum(self.stats.avg_tokens(b) for b in e.prompt.bindings)
                    calls += groups * agg_call_estimate(per_group, tokens, self.agg_batch_tokens)
            return replace(node, child=child, est_rows=_r(groups), est_ai_calls=_r(calls))
        raise TypeError(f"unknown plan node {type(node).__name__}")

    def _classify_selectivity(self, node: Classify) -> float:
        prof = self.profiles.get(node.pred_id)
        return prof.est_selectivity if prof is not None else 0.5

    def _row_calls(self, e, rows: float) -> float:
        if not isinstance(e, A.AiCall):
            return 0.0
        if e.kind is A.AiKind.COMPLETE:
            return rows
        if e.kind is A.AiKind.CLASSIFY:
            n = len(e.labels.items) if isinstance(e.labels, A.ArrayLit) else self._label_count(e.labels)
            return rows * max(1, math.ceil(n / MAX_LABELS_PER_CALL))
        return 0.0

    def _label_count(self, ref) -> int:
        d = self.stats.distinct(ref) if isinstance(ref, ColumnRef) else None
        return d or 1

    def _groups(self, node: Aggregate, rows: float) -> float:
        if not node.group_keys:
            return 1.0
        g = 1.0
        for e, _ in node.group_keys:
            if isinstance(e, ColumnRef):
                d = self.stats.distinct(e)
                g *= float(d) if d is not None else rows
            elif isinstance(e, A.AiCall) and isinstance(e.labels, A.ArrayLit):
                g *= float(len(e.labels.items))
            else:
                g *= rows
        return min(g, rows)


def annotate(plan: PlanNode, stats: StatsView, profiles, agg_batch_tokens: int = DEFAULT_AGG_BATCH_TOKENS) -> PlanNode:
    return Estimator(stats, profiles, agg_batch_tokens)(plan)
