"""semql: a desk-scale SQL engine with model-backed operators.

Typical use::

    from semql import plan_query, execute
    baseline, optimized = plan_query(sql, tables)
    result, stats = execute(optimized, tables, providers)
"""

from semql.cascade import CascadeConfig
from semql.core import FileRef, Schema, Table, ValueKind, load_catalog
from semql.errors import (
    ArityMismatch,
    ConfigMismatch,
    FixtureParseError,
    LabelOverflow,
    OracleUnavailable,
    PlanTypeError,
    ProviderError,
    QueryAborted,
    ScenarioParseError,
    SemqlError,
    SQLSyntaxError,
    UnknownNameError,
)
from semql.exec import ExecOptions, ExecStats, execute
from semql.kernels import BACKEND as KERNEL_BACKEND
from semql.parser import parse
from semql.planner import PlannerConfig, explain, optimize, plan_query

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "ArityMismatch",
    "CascadeConfig",
    "ConfigMismatch",
    "ExecOptions",
    "ExecStats",
    "FileRef",
    "FixtureParseError",
    "LabelOverflow",
    "OracleUnavailable",
    "PlanTypeError",
    "PlannerConfig",
    "ProviderError",
    "QueryAborted",
    "SQLSyntaxError",
    "ScenarioParseError",
    "Schema",
    "SemqlError",
    "Table",
    "UnknownNameError",
    "ValueKind",
    "execute",
    "explain",
    "load_catalog",
    "optimize",
    "parse",
    "plan_query",
]
