from semql.core.ingest import load_catalog, read_csv, read_jsonl, read_table, write_jsonl
from semql.core.prompt import PromptTemplate, render_prompt
from semql.core.stats import ColumnStats, TableStats, compute_stats
from semql.core.tokens import estimate_tokens, truncate_to_tokens
from semql.core.values import (
    Column,
    ColumnRef,
    FileRef,
    Schema,
    Table,
    ValueKind,
    compare_values,
    fl_is_image,
    kind_of,
    render_value,
)

__all__ = [
    "Column",
    "ColumnRef",
    "ColumnStats",
    "FileRef",
    "PromptTemplate",
    "Schema",
    "Table",
    "TableStats",
    "ValueKind",
    "compare_values",
    "compute_stats",
    "estimate_tokens",
    "fl_is_image",
    "kind_of",
    "load_catalog",
    "read_csv",
    "read_jsonl",
    "read_table",
    "render_prompt",
    "render_value",
    "truncate_to_tokens",
    "write_jsonl",
]
