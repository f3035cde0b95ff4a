"""Syntax tree for the supported semantic SQL subset."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Union

from semql.core.prompt import PromptTemplate
from semql.core.values import ColumnRef


class AiKind(str, Enum):
    COMPLETE = "AI_COMPLETE"
    FILTER = "AI_FILTER"
    CLASSIFY = "AI_CLASSIFY"
    AGG = "AI_AGG"
    SUMMARIZE_AGG = "AI_SUMMARIZE_AGG"


AGGREGATE_KINDS = frozenset({AiKind.AGG, AiKind.SUMMARIZE_AGG})


@dataclass(frozen=True)
class Literal:
    value: Any  # None, bool, int, float or str


@dataclass(frozen=True)
class Star:
    table: str | None = None


@dataclass(frozen=True)
class ArrayLit:
    items: tuple["Expr", ...]


@dataclass(frozen=True)
class AiCall:
    """One of the AI functions.

    ``prompt`` always holds a template: a bare column argument is the
    one-binding template ``'{0}'``, a bare string is a zero-binding template.
    ``bare_string`` records the latter so the printer can reproduce it.
    """

    kind: AiKind
    prompt: PromptTemplate
    labels: Union[ArrayLit, ColumnRef, None] = None
    instruction: str | None = None
    options: tuple[tuple[str, str], ...] = ()
    model: str | None = None
    bare_string: bool = False

    def option(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.options:
            if k.lower() == key.lower():
                return v
        return default


@dataclass(frozen=True)
class FuncCall:
    """Non-AI function: ``COUNT(*)`` or ``FL_IS_IMAGE(col)``."""

    name: str
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class Between:
    expr: "Expr"
    low: "Expr"
    high: "Expr"
    negated: bool = False


@dataclass(frozen=True)
class InList:
    expr: "Expr"
    items: tuple["Expr", ...]
    negated: bool = False


@dataclass(frozen=True)
class Compare:
    op: str  # one of = <> < <= > >=
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class IsNull:
    expr: "Expr"
    negated: bool = False


Expr = Union[Literal, ColumnRef, Star, ArrayLit, AiCall, FuncCall, Between, InList, Compare, IsNull]


@dataclass(frozen=True)
class SelectItem:
    expr: Expr
    alias: str | None = None


@dataclass(frozen=True)
class TableRef:
    name: str
    alias: str | None = None

    @property
    def binding(self) -> str:
        return self.alias or self.name


@dataclass(frozen=True)
class JoinClause:
    right: TableRef
    on: tuple[Expr, ...]
    sugar: bool = False  # written as AI_JOIN(...)


@dataclass(frozen=True)
class Select:
    items: tuple[SelectItem, ...]
    from_: TableRef | None = None
    join: JoinClause | None = None
    where: tuple[Expr, ...] = ()
    group_by: tuple[Expr, ...] = ()


def walk(expr: Expr):
    """Yield ``expr`` and all nested expressions, depth first."""
    yield expr
    if isinstance(expr, ArrayLit):
        for e in expr.items:
            yield from walk(e)
    elif isinstance(expr, AiCall):
        yield from expr.prompt.bindings
        if isinstance(expr.labels, ArrayLit):
            yield from walk(expr.labels)
        elif expr.labels is not None:
            yield expr.labels
    elif isinstance(expr, FuncCall):
        for e in expr.args:
            yield from walk(e)
    elif isinstance(expr, Between):
        yield from walk(expr.expr)
        yield from walk(expr.low)
        yield from walk(expr.high)
    elif isinstance(expr, InList):
        yield from walk(expr.expr)
        for e in expr.items:
            yield from walk(e)
    elif isinstance(expr, Compare):
        yield from walk(expr.left)
        yield from walk(expr.right)
    elif isinstance(expr, IsNull):
        yield from walk(expr.expr)


def column_refs(expr: Expr) -> list[ColumnRef]:
    return [e for e in walk(expr) if isinstance(e, ColumnRef)]


def ai_calls(expr: Expr) -> list[AiCall]:
    return [e for e in walk(expr) if isinstance(e, AiCall)]
