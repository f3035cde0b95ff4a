"""Logical plan nodes.

Every node carries ``est_rows`` (estimated output cardinality) and
``est_ai_calls`` (estimated model calls made by the node itself). Column
references inside plan expressions are fully qualified by table binding.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator

from semql.core.prompt import PromptTemplate
from semql.core.values import ColumnRef, ValueKind
from semql.parser.ast import AiCall, Expr


@dataclass(frozen=True)
class PlanColumn:
    qualifier: str | None
    name: str
    kind: ValueKind | None
    hidden: bool = False

    @property
    def ref(self) -> ColumnRef:
        return ColumnRef(self.qualifier, self.name)


@dataclass(frozen=True)
class Predicate:
    """One conjunct of a WHERE/ON clause."""

    id: int
    expr: Expr
    sql: str
    aliases: frozenset[str]
    ai: AiCall | None = None
    multimodal: bool = False

    @property
    def is_ai(self) -> bool:
        return self.ai is not None


@dataclass(frozen=True, kw_only=True)
class PlanNode:
    est_rows: float = 0.0
    est_ai_calls: float = 0.0
    note: str | None = None

    @property
    def children(self) -> tuple["PlanNode", ...]:
        return ()

    def with_children(self, *children: "PlanNode") -> "PlanNode":
        return self


@dataclass(frozen=True, kw_only=True)
class Scan(PlanNode):
    """Table scan. ``table=None`` produces a single empty row (``SELECT 1``)."""

    table: str | None
    binding: str
    columns: tuple[PlanColumn, ...] = ()


@dataclass(frozen=True, kw_only=True)
class Filter(PlanNode):
    pred: Predicate
    child: PlanNode

    @property
    def children(self):
        return (self.child,)

    def with_children(self, child):
        return replace(self, child=child)


@dataclass(frozen=True, kw_only=True)
class Join(PlanNode):
    """Inner join on ``equi_keys`` (hash join) or a cross join when there are none.

    ``ai_pred`` is a semantic predicate evaluated on every surviving pair.
    ``swap_output`` emits right columns first, used when a rewrite changed
    which input is built from which side.
    """

    equi_keys: tuple[tuple[ColumnRef, ColumnRef], ...]
    ai_pred: Predicate | None
    left: PlanNode
    right: PlanNode
    swap_output: bool = False

    @property
    def kind(self) -> str:
        return "inner" if self.equi_keys else "cross"

    @property
    def children(self):
        return (self.left, self.right)

    def with_children(self, left, right):
        return replace(self, left=left, right=right)


@dataclass(frozen=True, kw_only=True)
class Project(PlanNode):
    items: tuple[tuple[Expr, str], ...]
    child: PlanNode
    kinds: tuple[ValueKind | None, ...] = ()

    @property
    def children(self):
        return (self.child,)

    def with_children(self, child):
        return replace(self, child=child)


@dataclass(frozen=True, kw_only=True)
class Classify(PlanNode):
    """Multi-label classification of each input row against the distinct
    values of ``label_column`` produced by ``labels``.

    Emits one output row per (input row, matched label), with the matched
    label value appended as the hidden column ``__classify.__label``.
    """

    prompt: PromptTemplate
    row_binding: int
    label_binding: int
    label_column: ColumnRef
    labels: PlanNode
    chunk_size: int
    instruction: str
    model: str | None
    child: PlanNode
    label_kind: ValueKind | None = ValueKind.TEXT
    est_chunks: int = 1
    pred_id: int | None = None  # the join predicate this node replaced

    @property
    def children(self):
        return (self.child, self.labels)

    def with_children(self, child, labels):
        return replace(self, child=child, labels=labels)


LABEL_COLUMN = ColumnRef("__classify", "__label")


@dataclass(frozen=True, kw_only=True)
class Aggregate(PlanNode):
    group_keys: tuple[tuple[Expr, str], ...]
    aggs: tuple[tuple[Expr, str], ...]
    child: PlanNode
    kinds: tuple[ValueKind | None, ...] = ()

    @property
    def children(self):
        return (self.child,)

    def with_children(self, child):
        return replace(self, child=child)


def output_columns(node: PlanNode) -> tuple[PlanColumn, ...]:
    if isinstance(node, Scan):
        return node.columns
    if isinstance(node, Filter):
        return output_columns(node.child)
    if isinstance(node, Join):
        left, right = output_columns(node.left), output_columns(node.right)
        return right + left if node.swap_output else left + right
    if isinstance(node, Project):
        kinds = node.kinds or (None,) * len(node.items)
        return tuple(PlanColumn(None, name, k) for (_, name), k in zip(node.items, kinds))
    if isinstance(node, Classify):
        return output_columns(node.child) + (
            PlanColumn(LABEL_COLUMN.table, LABEL_COLUMN.name, node.label_kind, hidden=True),
        )
    if isinstance(node, Aggregate):
        names = [n for _, n in node.group_keys] + [n for _, n in node.aggs]
        kinds = node.kinds or (None,) * len(names)
        return tuple(PlanColumn(None, n, k) for n, k in zip(names, kinds))
    raise TypeError(f"unknown plan node {type(node).__name__}")


def walk(node: PlanNode) -> Iterator[PlanNode]:
    """Pre-order traversal; a node reachable twice (shared label input) is yielded once."""
    seen: set[int] = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        yield n
        stack.extend(reversed(n.children))


def total_ai_calls(node: PlanNode) -> float:
    return sum(n.est_ai_calls for n in walk(node))


def predicates(node: PlanNode) -> list[Predicate]:
    out = []
    for n in walk(node):
        if isinstance(n, Filter):
            out.append(n.pred)
        elif isinstance(n, Join) and n.ai_pred is not None:
            out.append(n.ai_pred)
    return out


@dataclass
class Catalog:
    """Tables visible to the planner and executor, keyed case-insensitively."""

    tables: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.tables = {k.lower(): v for k, v in self.tables.items()}

    def get(self, name: str):
        return self.tables.get(name.lower())

    def __contains__(self, name: str) -> bool:
        return name.lower() in self.tables

    def stats(self, name: str):
        return self.tables[name.lower()].stats


def as_catalog(catalog) -> Catalog:
    return catalog if isinstance(catalog, Catalog) else Catalog(dict(catalog))
