"""Pretty-printer producing SQL text that parses back to an equal tree."""

from __future__ import annotations

from semql.core.values import ColumnRef
from semql.parser.ast import (
    AiCall,
    AiKind,
    ArrayLit,
    Between,
    Compare,
    FuncCall,
    InList,
    IsNull,
    Literal,
    Select,
    Star,
)


def quote(s: str) -> str:
    return "'" + s.replace("'", "''") + "'"


def expr_sql(e) -> str:
    if isinstance(e, Literal):
        v = e.value
        if v is None:
            return "NULL"
        if isinstance(v, bool):
            return "TRUE" if v else "FALSE"
        if isinstance(v, str):
            return quote(v)
        return repr(v)
    if isinstance(e, ColumnRef):
        return str(e)
    if isinstance(e, Star):
        return f"{e.table}.*" if e.table else "*"
    if isinstance(e, ArrayLit):
        return "[" + ", ".join(expr_sql(i) for i in e.items) + "]"
    if isinstance(e, AiCall):
        return _ai_sql(e)
    if isinstance(e, FuncCall):
        return f"{e.name}(" + ", ".join(expr_sql(a) for a in e.args) + ")"
    if isinstance(e, Between):
        neg = "NOT " if e.negated else ""
        return f"{expr_sql(e.expr)} {neg}BETWEEN {expr_sql(e.low)} AND {expr_sql(e.high)}"
    if isinstance(e, InList):
        neg = "NOT " if e.negated else ""
        return f"{expr_sql(e.expr)} {neg}IN (" + ", ".join(expr_sql(i) for i in e.items) + ")"
    if isinstance(e, Compare):
        return f"{expr_sql(e.left)} {e.op} {expr_sql(e.right)}"
    if isinstance(e, IsNull):
        return f"{expr_sql(e.expr)} IS {'NOT ' if e.negated else ''}NULL"
    raise TypeError(f"cannot print {e!r}")


def _prompt_sql(call: AiCall) -> str:
    p = call.prompt
    if call.bare_string:
        return quote(p.template)
    if p.template == "{0}" and len(p.bindings) == 1:
        return str(p.bindings[0])
    args = [quote(p.template)] + [str(b) for b in p.bindings]
    return "PROMPT(" + ", ".join(args) + ")"


def _ai_sql(call: AiCall) -> str:
    args: list[str] = []
    if call.kind is AiKind.COMPLETE:
        if call.model is not None:
            args.append(quote(call.model))
        if call.instruction is not None:
            args.append(quote(call.instruction))
        args.append(_prompt_sql(call))
    elif call.kind is AiKind.CLASSIFY:
        args.append(_prompt_sql(call))
        args.append(expr_sql(call.labels))
        if call.instruction is not None:
            args.append(quote(call.instruction))
    elif call.kind is AiKind.AGG:
        args.append(_prompt_sql(call))
        args.append(quote(call.instruction or ""))
    else:
        args.append(_prompt_sql(call))
    if call.options:
        args.append("{" + ", ".join(f"{quote(k)}: {quote(v)}" for k, v in call.options) + "}")
    return f"{call.kind.value}(" + ", ".join(args) + ")"


def to_sql(stmt: Select) -> str:
    parts = []
    items = []
    for item in stmt.items:
        text = expr_sql(item.expr)
        if item.alias:
            text += f" AS {item.alias}"
        items.append(text)
    parts.append("SELECT " + ", ".join(items))
    if stmt.from_ is not None:
        parts.append("FROM " + _table_sql(stmt.from_))
        if stmt.join is not None:
            parts.append("JOIN " + _table_sql(stmt.join.right))
            parts.append("ON " + " AND ".join(expr_sql(e) for e in stmt.join.on))
    if stmt.where:
        parts.append("WHERE " + " AND ".join(expr_sql(e) for e in stmt.where))
    if stmt.group_by:
        parts.append("GROUP BY " + ", ".join(expr_sql(e) for e in stmt.group_by))
    return "\n".join(parts)


def _table_sql(t) -> str:
    return f"{t.name} AS {t.alias}" if t.alias else t.name
