"""Per-table statistics used by the planner's cost model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from semql.core.tokens import estimate_tokens
from semql.core.values import render_value

SAMPLE_SIZE = 10


@dataclass(frozen=True)
class ColumnStats:
    distinct_count: int
    avg_token_count: float
    max_token_count: int
    null_count: int
    sample_values: tuple[Any, ...]


@dataclass(frozen=True)
class TableStats:
    row_count: int
    columns: dict[str, ColumnStats]

    def column(self, name: str) -> ColumnStats:
        key = name.lower()
        for col, st in self.columns.items():
            if col.lower() == key:
                return st
        raise KeyError(name)


def compute_stats(table) -> TableStats:
    columns: dict[str, ColumnStats] = {}
    for i, col in enumerate(table.schema):
        seen: set = set()
        samples: list = []
        total_tokens = 0
        max_tokens = 0
        non_null = 0
        for row in table.rows:
            v = row[i]
            if v is None:
                continue
            non_null += 1
            t = estimate_tokens(render_value(v))
            total_tokens += t
            if t > max_tokens:
                max_tokens = t
            if v not in seen:
                seen.add(v)
                if len(samples) < SAMPLE_SIZE:
                    samples.append(v)
        columns[col.name] = ColumnStats(
            distinct_count=len(seen),
            avg_token_count=total_tokens / non_null if non_null else 0.0,
            max_token_count=max_tokens,
            null_count=len(table.rows) - non_null,
            sample_values=tuple(samples),
        )
    return TableStats(row_count=len(table.rows), columns=columns)
