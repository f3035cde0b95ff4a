"""Predicate profiles: per-row cost and selectivity estimates."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import IntEnum
from typing import Mapping

from semql.core.values import ColumnRef
from semql.parser import ast as A
from semql.planner.plan import Catalog, Predicate, Scan, predicates, walk

DEFAULT_AI_SELECTIVITY = 0.5
DEFAULT_CHEAP_SELECTIVITY = 0.3
MULTIMODAL_FACTOR = 10.0


class PredKind(IntEnum):
    # order doubles as the tie-break priority
    CHEAP = 0
    AI_TEXT = 1
    AI_MULTIMODAL = 2


@dataclass(frozen=True)
class Observed:
    rows_seen: int
    rows_passed: int
    total_cost: float = 0.0

    def __post_init__(self) -> None:
        if not 0 <= self.rows_passed <= self.rows_seen:
            raise ValueError("rows_passed must lie in [0, rows_seen]")


@dataclass(frozen=True)
class PredicateProfile:
    pred_id: int
    kind: PredKind
    est_cost_per_row: float
    est_selectivity: float
    observed: Observed | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.est_selectivity <= 1.0:
            raise ValueError(f"selectivity {self.est_selectivity} outside [0, 1]")

    @property
    def rank(self) -> float:
        if self.est_selectivity >= 1.0:
            return math.inf
        return self.est_cost_per_row / (1.0 - self.est_selectivity)


def binding_tables(plan) -> dict[str, str]:
    """Map lower-cased table bindings to catalog table names."""
    out = {}
    for n in walk(plan):
        if isinstance(n, Scan) and n.table is not None:
            out[n.binding.lower()] = n.table
    return out


class StatsView:
    """Column statistics looked up through plan bindings."""

    def __init__(self, catalog: Catalog, bindings: Mapping[str, str]):
        self.catalog = catalog
        self.bindings = bindings

    def column(self, ref: ColumnRef):
        if ref.table is None:
            return None
        table = self.bindings.get(ref.table.lower())
        if table is None or table not in self.catalog:
            return None
        try:
            return self.catalog.stats(table).column(ref.name)
        except KeyError:
            return None

    def row_count(self, ref: ColumnRef) -> int | None:
        table = self.bindings.get((ref.table or "").lower())
        if table is None or table not in self.catalog:
            return None
        return self.catalog.stats(table).row_count

    def avg_tokens(self, ref: ColumnRef) -> float:
        st = self.column(ref)
        return st.avg_token_count if st else 0.0

    def distinct(self, ref: ColumnRef) -> int | None:
        st = self.column(ref)
        return st.distinct_count if st else None


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))


def cheap_selectivity(expr, stats: StatsView) -> float:
    if isinstance(expr, A.Literal):
        return 1.0 if expr.value is True else 0.0
    if isinstance(expr, A.InList) and isinstance(expr.expr, ColumnRef):
        d = stats.distinct(expr.expr)
        items = len(set(i.value for i in expr.items if isinstance(i, A.Literal)))
        s = _clamp(items / d) if d else DEFAULT_CHEAP_SELECTIVITY
        return 1.0 - s if expr.negated else s
    if isinstance(expr, A.Compare) and expr.op == "=":
        col = expr.left if isinstance(expr.left, ColumnRef) else expr.right
        other = expr.right if col is expr.left else expr.left
        if isinstance(col, ColumnRef) and isinstance(other, A.Literal):
            d = stats.distinct(col)
            return 1.0 / d if d else DEFAULT_CHEAP_SELECTIVITY
    if isinstance(expr, A.IsNull) and isinstance(expr.expr, ColumnRef):
        st = stats.column(expr.expr)
        n = stats.row_count(expr.expr)
        if st is not None and n:
            frac = st.null_count / n
            return 1.0 - frac if expr.negated else frac
    return DEFAULT_CHEAP_SELECTIVITY


def ai_cost(pred: Predicate, stats: StatsView) -> float:
    tokens = sum(stats.avg_tokens(b) for b in pred.ai.prompt.bindings)
    return tokens * MULTIMODAL_FACTOR if pred.multimodal else tokens


def profile_predicate(
    pred: Predicate,
    stats: StatsView,
    hints: Mapping[str, float] | None = None,
    runtime: Mapping[str, Observed] | None = None,
) -> PredicateProfile:
    observed = (runtime or {}).get(pred.sql)
    if pred.is_ai:
        kind = PredKind.AI_MULTIMODAL if pred.multimodal else PredKind.AI_TEXT
        cost = ai_cost(pred, stats)
        sel = DEFAULT_AI_SELECTIVITY
    else:
        kind = PredKind.CHEAP
        cost = 1.0
        sel = cheap_selectivity(pred.expr, stats)
    hint = hint_for(pred, hints)
    if hint is not None:
        sel = _clamp(hint)
    if observed is not None and observed.rows_seen > 0:
        sel = observed.rows_passed / observed.rows_seen
        if observed.total_cost > 0:
            cost = observed.total_cost / observed.rows_seen
    return PredicateProfile(pred.id, kind, float(cost), float(sel), observed)


def _squash(sql: str) -> str:
    return " ".join(sql.split()).lower()


def hint_for(pred: Predicate, hints: Mapping[str, float] | None) -> float | None:
    """Selectivity hint for ``pred``, keyed by its SQL with or without table qualifiers."""
    if not hints:
        return None
    if pred.sql in hints:
        return float(hints[pred.sql])
    bare = pred.sql
    for alias in pred.aliases:
        bare = re.sub(rf"(?<![\w.]){re.escape(alias)}\.", "", bare, flags=re.IGNORECASE)
    wanted = {_squash(pred.sql), _squash(bare)}
    for key, value in hints.items():
        if _squash(key) in wanted:
            return float(value)
    return None


def profile_predicates(plan, catalog: Catalog, hints=None, runtime=None) -> list[PredicateProfile]:
    stats = StatsView(catalog, binding_tables(plan))
    return [profile_predicate(p, stats, hints, runtime) for p in predicates(plan)]


def expected_cost(profiles) -> float:
    """Expected per-row cost of evaluating independent conjuncts in the given order."""
    total, passing = 0.0, 1.0
    for p in profiles:
        total += passing * p.est_cost_per_row
        passing *= p.est_selectivity
    return total


__all__ = [
    "DEFAULT_AI_SELECTIVITY",
    "DEFAULT_CHEAP_SELECTIVITY",
    "MULTIMODAL_FACTOR",
    "Observed",
    "PredKind",
    "PredicateProfile",
    "StatsView",
    "binding_tables",
    "expected_cost",
    "profile_predicate",
    "profile_predicates",
]
