from semql.exec.engine import ExecOptions, execute, resolve_column
from semql.exec.reorder import AdaptiveOrder, adaptive_reorder, observed_profiles
from semql.exec.stats import CascadeSummary, ExecStats, NodeStats, PredicateStats

__all__ = [
    "AdaptiveOrder",
    "CascadeSummary",
    "ExecOptions",
    "ExecStats",
    "NodeStats",
    "PredicateStats",
    "adaptive_reorder",
    "execute",
    "observed_profiles",
    "resolve_column",
]
