from semql.planner.cost import Observed, PredicateProfile, PredKind, StatsView, expected_cost, profile_predicates
from semql.planner.explain import explain, explain_with_total
from semql.planner.optimizer import PlannerConfig, finalize, optimize, plan_query
from semql.planner.order import order_predicates
from semql.planner.placement import place_ai_predicates
from semql.planner.plan import (
    LABEL_COLUMN,
    Aggregate,
    Catalog,
    Classify,
    Filter,
    Join,
    PlanNode,
    Predicate,
    Project,
    Scan,
    output_columns,
    total_ai_calls,
)
from semql.planner.rewrite import (
    HeuristicOracle,
    LlmOracle,
    RewritePlan,
    apply_classify_rewrite,
    detect_classify_rewrite,
    label_chunk_size,
)

__all__ = [
    "LABEL_COLUMN",
    "Aggregate",
    "Catalog",
    "Classify",
    "Filter",
    "HeuristicOracle",
    "Join",
    "LlmOracle",
    "Observed",
    "PlanNode",
    "PlannerConfig",
    "PredKind",
    "Predicate",
    "PredicateProfile",
    "Project",
    "RewritePlan",
    "Scan",
    "StatsView",
    "apply_classify_rewrite",
    "detect_classify_rewrite",
    "expected_cost",
    "explain",
    "explain_with_total",
    "finalize",
    "label_chunk_size",
    "optimize",
    "order_predicates",
    "output_columns",
    "place_ai_predicates",
    "plan_query",
    "profile_predicates",
    "total_ai_calls",
]
