"""Lowering of a parsed statement into the canonical push-down logical plan.

Every conjunct is placed at its lowest legal position and conjuncts at the
same position keep their textual order (ON before WHERE). This is the
baseline an optimizer starts from.
"""

from __future__ import annotations

from dataclasses import replace

from semql.core.prompt import PromptTemplate
from semql.core.values import ColumnRef, ValueKind, kind_of
from semql.errors import PlanTypeError, UnknownNameError
from semql.parser import ast as A
from semql.parser.printer import expr_sql
from semql.planner.plan import (
    Aggregate,
    Catalog,
    Filter,
    Join,
    PlanColumn,
    PlanNode,
    Predicate,
    Project,
    Scan,
    as_catalog,
    output_columns,
)


class _Scope:
    def __init__(self, bindings: list[tuple[str, PlanColumn]]):
        self.columns = bindings  # list of (binding, column)

    def resolve(self, ref: ColumnRef) -> PlanColumn:
        name = ref.name.lower()
        if ref.table is not None:
            q = ref.table.lower()
            for binding, col in self.columns:
                if binding.lower() == q and col.name.lower() == name:
                    return col
            if not any(b.lower() == q for b, _ in self.columns):
                raise UnknownNameError(f"unknown table or alias {ref.table!r}")
            raise UnknownNameError(f"unknown column {ref}")
        hits = [col for _, col in self.columns if col.name.lower() == name]
        if not hits:
            raise UnknownNameError(f"unknown column {ref.name!r}")
        if len(hits) > 1:
            raise UnknownNameError(f"ambiguous column {ref.name!r}")
        return hits[0]


def _resolve_expr(e, scope: _Scope):
    """Return ``e`` with every column reference fully qualified."""
    if isinstance(e, ColumnRef):
        col = scope.resolve(e)
        return ColumnRef(col.qualifier, col.name)
    if isinstance(e, A.AiCall):
        bindings = tuple(_resolve_expr(b, scope) for b in e.prompt.bindings)
        labels = e.labels
        if isinstance(labels, ColumnRef):
            labels = _resolve_expr(labels, scope)
        return replace(e, prompt=PromptTemplate(e.prompt.template, bindings), labels=labels)
    if isinstance(e, A.FuncCall):
        return replace(e, args=tuple(a if isinstance(a, A.Star) else _resolve_expr(a, scope) for a in e.args))
    if isinstance(e, A.Between):
        return replace(e, expr=_resolve_expr(e.expr, scope), low=_resolve_expr(e.low, scope), high=_resolve_expr(e.high, scope))
    if isinstance(e, A.InList):
        return replace(e, expr=_resolve_expr(e.expr, scope), items=tuple(_resolve_expr(i, scope) for i in e.items))
    if isinstance(e, A.Compare):
        return replace(e, left=_resolve_expr(e.left, scope), right=_resolve_expr(e.right, scope))
    if isinstance(e, A.IsNull):
        return replace(e, expr=_resolve_expr(e.expr, scope))
    if isinstance(e, A.ArrayLit):
        return replace(e, items=tuple(_resolve_expr(i, scope) for i in e.items))
    return e


def expr_kind(e, scope: _Scope) -> ValueKind | None:
    if isinstance(e, A.Literal):
        return kind_of(e.value)
    if isinstance(e, ColumnRef):
        return scope.resolve(e).kind
    if isinstance(e, A.AiCall):
        return ValueKind.BOOL if e.kind is A.AiKind.FILTER else ValueKind.TEXT
    if isinstance(e, A.FuncCall):
        return ValueKind.INT if e.name == "COUNT" else ValueKind.BOOL
    if isinstance(e, (A.Between, A.InList, A.Compare, A.IsNull)):
        return ValueKind.BOOL
    return None


def _check_boolean(e, scope: _Scope) -> None:
    if isinstance(e, A.AiCall) and e.kind is not A.AiKind.FILTER:
        raise PlanTypeError(f"{e.kind.value} returns text and cannot be used as a predicate")
    for sub in A.walk(e):
        if isinstance(sub, A.AiCall) and sub.kind is A.AiKind.FILTER and sub is not e:
            raise PlanTypeError("AI_FILTER must be a top-level conjunct")
    if isinstance(e, A.FuncCall) and e.name == "FL_IS_IMAGE":
        if expr_kind(e.args[0], scope) is not ValueKind.FILE:
            raise PlanTypeError("FL_IS_IMAGE expects a FILE column")
    kind = expr_kind(e, scope)
    if kind is not ValueKind.BOOL and not (isinstance(e, A.Literal) and e.value is None):
        raise PlanTypeError(f"predicate {expr_sql(e)} is not boolean")


def _aliases(e) -> frozenset[str]:
    return frozenset(r.table.lower() for r in A.column_refs(e) if r.table)


def _default_name(e) -> str:
    if isinstance(e, ColumnRef):
        return e.name
    if isinstance(e, A.AiCall):
        return e.kind.value
    if isinstance(e, A.FuncCall):
        return f"{e.name}(*)" if e.args and isinstance(e.args[0], A.Star) else e.name
    return expr_sql(e)


def _is_aggregate(e) -> bool:
    if isinstance(e, A.AiCall) and e.kind in A.AGGREGATE_KINDS:
        return True
    return isinstance(e, A.FuncCall) and e.name == "COUNT"


def _unique_names(items: list[tuple[object, str, str | None]]) -> list[str]:
    """Disambiguate duplicate output names by qualifying them with their table binding."""
    lowered = [n.lower() for _, n, _ in items]
    out = []
    for (_, name, qual), low in zip(items, lowered):
        if lowered.count(low) > 1 and qual:
            out.append(f"{qual}.{name}")
        else:
            out.append(name)
    seen: dict[str, int] = {}
    final = []
    for n in out:
        k = n.lower()
        if k in seen:
            seen[k] += 1
            n = f"{n}_{seen[k]}"
        else:
            seen[k] = 0
        final.append(n)
    return final


def lower(stmt: A.Select, catalog) -> PlanNode:
    catalog: Catalog = as_catalog(catalog)
    next_id = iter(range(1_000_000))

    def scan_for(ref: A.TableRef) -> Scan:
        table = catalog.get(ref.name)
        if table is None:
            raise UnknownNameError(f"unknown table {ref.name!r}")
        binding = ref.binding
        cols = tuple(PlanColumn(binding, c.name, c.kind) for c in table.schema)
        return Scan(table=ref.name, binding=binding, columns=cols)

    if stmt.from_ is None:
        left = Scan(table=None, binding="")
        right = None
    else:
        left = scan_for(stmt.from_)
        right = scan_for(stmt.join.right) if stmt.join else None
        if right is not None and right.binding.lower() == left.binding.lower():
            raise UnknownNameError(f"duplicate table binding {right.binding!r}; use an alias")

    scope_cols = [(c.qualifier or "", c) for c in left.columns]
    if right is not None:
        scope_cols += [(c.qualifier or "", c) for c in right.columns]
    scope = _Scope(scope_cols)
    left_alias = left.binding.lower()
    right_alias = right.binding.lower() if right is not None else None

    conjuncts = list(stmt.join.on if stmt.join else ()) + list(stmt.where)
    left_preds: list[Predicate] = []
    right_preds: list[Predicate] = []
    post_preds: list[Predicate] = []
    equi: list[tuple[ColumnRef, ColumnRef]] = []
    join_ai: Predicate | None = None

    for raw in conjuncts:
        e = _resolve_expr(raw, scope)
        _check_boolean(e, scope)
        aliases = _aliases(e)
        ai = e if isinstance(e, A.AiCall) else None
        multimodal = bool(ai) and any(scope.resolve(b).kind is ValueKind.FILE for b in ai.prompt.bindings)
        pred = Predicate(next(next_id), e, expr_sql(e), aliases, ai, multimodal)
        if right is None or not aliases or aliases == {left_alias}:
            left_preds.append(pred)
        elif aliases == {right_alias}:
            right_preds.append(pred)
        elif (
            isinstance(e, A.Compare)
            and e.op == "="
            and isinstance(e.left, ColumnRef)
            and isinstance(e.right, ColumnRef)
        ):
            l, r = e.left, e.right
            if l.table.lower() == right_alias:
                l, r = r, l
            equi.append((l, r))
        elif ai is not None and join_ai is None:
            join_ai = pred
        else:
            post_preds.append(pred)

    def stack(node: PlanNode, preds: list[Predicate]) -> PlanNode:
        for p in preds:
            node = Filter(pred=p, child=node)
        return node

    node = stack(left, left_preds)
    if right is not None:
        node = Join(equi_keys=tuple(equi), ai_pred=join_ai, left=node, right=stack(right, right_preds))
        node = stack(node, post_preds)
    return _lower_select(stmt, node, scope)


def _expand_items(stmt: A.Select, node: PlanNode, scope: _Scope):
    items = []  # (expr, name, qualifier)
    visible = [c for c in output_columns(node) if not c.hidden]
    for item in stmt.items:
        if isinstance(item.expr, A.Star):
            cols = visible
            if item.expr.table:
                q = item.expr.table.lower()
                cols = [c for c in visible if (c.qualifier or "").lower() == q]
                if not cols:
                    raise UnknownNameError(f"unknown table or alias {item.expr.table!r}")
            for c in cols:
                items.append((c.ref, c.name, c.qualifier))
            continue
        e = _resolve_expr(item.expr, scope)
        if isinstance(e, A.AiCall) and e.kind is A.AiKind.FILTER:
            raise PlanTypeError("AI_FILTER is only allowed in WHERE or ON")
        qual = e.table if isinstance(e, ColumnRef) else None
        items.append((e, item.alias or _default_name(e), qual))
    return items


def _lower_select(stmt: A.Select, node: PlanNode, scope: _Scope) -> PlanNode:
    items = _expand_items(stmt, node, scope)
    names = _unique_names(items)
    kinds = tuple(expr_kind(e, scope) for e, _, _ in items)
    has_agg = any(_is_aggregate(e) for e, _, _ in items)
    if not has_agg and not stmt.group_by:
        return Project(items=tuple((e, n) for (e, _, _), n in zip(items, names)), child=node, kinds=kinds)

    # GROUP BY keys are columns or aliases of non-aggregate select items;
    # computed keys (an AI_CLASSIFY alias) are evaluated by the Aggregate itself.
    alias_map = {n.lower(): e for (e, _, _), n in zip(items, names)}
    keys: list[tuple[object, str]] = []
    for g in stmt.group_by:
        if isinstance(g, ColumnRef) and g.table is None and g.name.lower() in alias_map:
            e = alias_map[g.name.lower()]
            if _is_aggregate(e):
                raise PlanTypeError(f"cannot group by aggregate {g.name}")
            keys.append((e, g.name))
        else:
            e = _resolve_expr(g, scope)
            keys.append((e, _default_name(e)))
    key_names = [n for _, n in keys]
    if len({n.lower() for n in key_names}) != len(key_names):
        raise PlanTypeError("duplicate GROUP BY key")

    aggs: list[tuple[object, str]] = []
    final: list[tuple[object, str]] = []
    for (e, _, _), name in zip(items, names):
        if _is_aggregate(e):
            aggs.append((e, name))
            final.append((ColumnRef(None, name), name))
            continue
        match = next((kn for ke, kn in keys if ke == e), None)
        if match is None:
            raise PlanTypeError(f"{expr_sql(e)} must appear in GROUP BY or be aggregated")
        final.append((ColumnRef(None, match), name))
    # aggregate output names may collide with key names; keep them distinct
    agg_names = _unique_names([(None, n, None) for n in key_names + [n for _, n in aggs]])[len(keys):]
    remap = {old: new for (_, old), new in zip(aggs, agg_names)}
    aggs = [(e, n) for (e, _), n in zip(aggs, agg_names)]
    key_kinds = [expr_kind(e, scope) for e, _ in keys]
    agg_kinds = [expr_kind(e, scope) for e, _ in aggs]
    agg_node = Aggregate(group_keys=tuple(keys), aggs=tuple(aggs), child=node, kinds=tuple(key_kinds + agg_kinds))
    out_kind = {n.lower(): k for n, k in zip(key_names + agg_names, key_kinds + agg_kinds)}
    final = [(ColumnRef(None, remap.get(r.name, r.name)), n) for r, n in final]
    return Project(
        items=tuple(final),
        child=agg_node,
        kinds=tuple(out_kind.get(r.name.lower()) for r, _ in final),
    )
