"""Stable text rendering of annotated plans."""

from __future__ import annotations

from semql.parser.printer import expr_sql
from semql.planner.plan import Aggregate, Classify, Filter, Join, PlanNode, Project, Scan, total_ai_calls


def fmt_num(x: float) -> str:
    r = round(x)
    if abs(x - r) < 1e-6:
        return str(int(r))
    return f"{x:.2f}"


def describe(node: PlanNode) -> str:
    if isinstance(node, Scan):
        if node.table is None:
            return "Values (1 row)"
        if node.binding.lower() != node.table.lower():
            return f"Scan {node.table} AS {node.binding}"
        return f"Scan {node.table}"
    if isinstance(node, Filter):
        return f"Filter {node.pred.sql}"
    if isinstance(node, Join):
        conds = [f"{a} = {b}" for a, b in node.equi_keys]
        if node.ai_pred is not None:
            conds.append(node.ai_pred.sql)
        text = f"Join {node.kind}"
        if conds:
            text += " ON " + " AND ".join(conds)
        return text
    if isinstance(node, Classify):
        return (
            f"Classify {node.prompt.template!r} labels={node.label_column} "
            f"chunk_size={node.chunk_size} chunks={node.est_chunks}"
        )
    if isinstance(node, Project):
        return "Project " + ", ".join(name if expr_sql(e) == name else f"{expr_sql(e)} AS {name}" for e, name in node.items)
    if isinstance(node, Aggregate):
        keys = ", ".join(expr_sql(e) for e, _ in node.group_keys) or "()"
        aggs = ", ".join(f"{expr_sql(e)} AS {n}" for e, n in node.aggs)
        return f"Aggregate keys={keys} aggs={aggs}"
    return type(node).__name__


def explain(plan: PlanNode) -> str:
    lines: list[str] = []

    def visit(node: PlanNode, depth: int) -> None:
        text = describe(node)
        if node.note:
            text += f" [{node.note}]"
        lines.append(f"{'  ' * depth}{text} (rows={fmt_num(node.est_rows)}, ai_calls={fmt_num(node.est_ai_calls)})")
        for child in node.children:
            visit(child, depth + 1)

    visit(plan, 0)
    return "\n".join(lines)


def explain_with_total(plan: PlanNode, title: str) -> str:
    return f"{title} (total ai_calls={fmt_num(total_ai_calls(plan))})\n{explain(plan)}"
