"""Optimizer entry points: baseline and AI-aware plans for one statement."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from semql.parser import ast as A
from semql.parser.parser import parse
from semql.planner.cost import Observed, StatsView, binding_tables, profile_predicates
from semql.planner.estimate import DEFAULT_AGG_BATCH_TOKENS, annotate
from semql.planner.placement import place_ai_predicates
from semql.planner.plan import Catalog, Join, PlanNode, as_catalog, walk
from semql.planner.rewrite import (
    DEFAULT_CLASSIFY_INSTRUCTION,
    HeuristicOracle,
    apply_classify_rewrite,
    detect_classify_rewrite,
)

DEFAULT_CONTEXT_WINDOW = 8192


@dataclass
class PlannerConfig:
    reorder: bool = True
    placement: str = "auto"  # auto | pullup | pushdown
    rewrite: bool = True
    context_window_tokens: int = DEFAULT_CONTEXT_WINDOW
    selectivity_hints: Mapping[str, float] = field(default_factory=dict)
    runtime_stats: Mapping[str, Observed] = field(default_factory=dict)
    rewrite_oracle: object | None = None
    classify_instruction: str = DEFAULT_CLASSIFY_INSTRUCTION
    agg_batch_tokens: int = DEFAULT_AGG_BATCH_TOKENS


def _context(plan: PlanNode, catalog: Catalog, config: PlannerConfig):
    stats = StatsView(catalog, binding_tables(plan))
    profiles = profile_predicates(plan, catalog, config.selectivity_hints, config.runtime_stats)
    return stats, profiles


def finalize(plan: PlanNode, catalog, config: PlannerConfig | None = None) -> PlanNode:
    """Annotate ``plan`` with row and call estimates."""
    config = config or PlannerConfig()
    catalog = as_catalog(catalog)
    stats, profiles = _context(plan, catalog, config)
    return annotate(plan, stats, {p.pred_id: p for p in profiles}, config.agg_batch_tokens)


def optimize(plan: PlanNode, catalog, config: PlannerConfig | None = None) -> PlanNode:
    config = config or PlannerConfig()
    catalog = as_catalog(catalog)
    stats, profiles = _context(plan, catalog, config)
    placement = config.placement if config.placement != "on" else "auto"
    plan = place_ai_predicates(plan, profiles, stats, mode=placement, reorder=config.reorder)
    if config.rewrite:
        join = next((n for n in walk(plan) if isinstance(n, Join)), None)
        if join is not None:
            rw = detect_classify_rewrite(join, stats, config.rewrite_oracle or HeuristicOracle())
            if rw is not None:
                plan = apply_classify_rewrite(
                    plan, rw, stats, config.context_window_tokens, config.classify_instruction
                )
    return annotate(plan, stats, {p.pred_id: p for p in profiles}, config.agg_batch_tokens)


def plan_query(sql: str | A.Select, catalog, config: PlannerConfig | None = None) -> tuple[PlanNode, PlanNode]:
    """Return the annotated (baseline, optimized) plans for a statement."""
    from semql.parser.lower import lower  # lowering depends on the plan module

    config = config or PlannerConfig()
    catalog = as_catalog(catalog)
    stmt = parse(sql) if isinstance(sql, str) else sql
    lowered = lower(stmt, catalog)
    return finalize(lowered, catalog, config), optimize(lowered, catalog, config)
