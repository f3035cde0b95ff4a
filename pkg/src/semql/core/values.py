"""Relational data model: values, FILE references, schemas and tables.

Values are plain Python objects (``None``, ``bool``, ``int``, ``float``,
``str`` and :class:`FileRef`); :class:`ValueKind` names the column types.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Sequence

from semql.errors import PlanTypeError, UnknownNameError

_MIME_RE = re.compile(r"^[a-z0-9][a-z0-9!#$&^_.+-]*/[a-z0-9][a-z0-9!#$&^_.+-]*$")


class ValueKind(str, Enum):
    BOOL = "bool"
    INT = "int"
    FLOAT = "float"
    TEXT = "text"
    FILE = "file"


@dataclass(frozen=True, eq=False)
class FileRef:
    """Reference to a file in external storage plus advisory metadata.

    Equality and hashing use the URI only, so joins on FILE columns stay
    stable when metadata is refreshed.
    """

    uri: str
    mime_type: str
    size_bytes: int = 0
    created_at: float = 0.0

    def __post_init__(self) -> None:
        if not self.uri:
            raise ValueError("FileRef uri must be non-empty")
        if self.size_bytes < 0:
            raise ValueError("FileRef size_bytes must be >= 0")
        if not _MIME_RE.match(self.mime_type):
            raise ValueError(f"mime type must be lowercase type/subtype, got {self.mime_type!r}")

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FileRef) and other.uri == self.uri

    def __hash__(self) -> int:
        return hash(("FileRef", self.uri))

    def __str__(self) -> str:
        return self.uri


def fl_is_image(f: FileRef) -> bool:
    return f.mime_type.startswith("image/")


def kind_of(value: Any) -> ValueKind | None:
    """Kind of a single value; ``None`` for NULL."""
    if value is None:
        return None
    if isinstance(value, bool):
        return ValueKind.BOOL
    if isinstance(value, int):
        return ValueKind.INT
    if isinstance(value, float):
        return ValueKind.FLOAT
    if isinstance(value, str):
        return ValueKind.TEXT
    if isinstance(value, FileRef):
        return ValueKind.FILE
    raise PlanTypeError(f"unsupported value type {type(value).__name__}")


def check_value(value: Any, kind: ValueKind) -> None:
    actual = kind_of(value)
    if actual is None:
        return
    if actual is not kind:
        raise PlanTypeError(f"value {value!r} of kind {actual.value} in {kind.value} column")
    if actual is ValueKind.FLOAT and not math.isfinite(value):
        raise PlanTypeError("non-finite floats cannot be stored")


def compare_values(a: Any, b: Any) -> int | None:
    """Three-way comparison; ``None`` when either side is NULL.

    Mixing non-null variants is a type error rather than a coercion.
    """
    if a is None or b is None:
        return None
    ka, kb = kind_of(a), kind_of(b)
    if ka is not kb:
        raise PlanTypeError(f"cannot compare {ka.value} with {kb.value}")
    if ka is ValueKind.FILE:
        a, b = a.uri, b.uri
    return (a > b) - (a < b)


def render_value(value: Any) -> str:
    """Text form used inside prompts and for token accounting."""
    if value is None:
        return "NULL"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, FileRef):
        return value.uri
    return str(value)


@dataclass(frozen=True)
class ColumnRef:
    """Possibly qualified column reference, e.g. ``p.abstract``."""

    table: str | None
    name: str

    def __str__(self) -> str:
        return f"{self.table}.{self.name}" if self.table else self.name


@dataclass(frozen=True)
class Column:
    name: str
    kind: ValueKind


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for col in self.columns:
            key = col.name.lower()
            if key in seen:
                raise ValueError(f"duplicate column name {col.name!r}")
            seen.add(key)

    @classmethod
    def of(cls, *pairs: tuple[str, ValueKind]) -> "Schema":
        return cls(tuple(Column(n, k) for n, k in pairs))

    def __len__(self) -> int:
        return len(self.columns)

    def __iter__(self):
        return iter(self.columns)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def index(self, name: str) -> int:
        key = name.lower()
        for i, col in enumerate(self.columns):
            if col.name.lower() == key:
                return i
        raise UnknownNameError(f"unknown column {name!r}")

    def has(self, name: str) -> bool:
        key = name.lower()
        return any(c.name.lower() == key for c in self.columns)


@dataclass(frozen=True, eq=False)
class Table:
    """Immutable in-memory table; rows are tuples matching the schema arity."""

    name: str
    schema: Schema
    rows: tuple[tuple, ...]
    _stats: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self) -> None:
        arity = len(self.schema)
        kinds = [c.kind for c in self.schema]
        rows = tuple(tuple(r) for r in self.rows)
        for i, row in enumerate(rows):
            if len(row) != arity:
                raise ValueError(f"row {i} of {self.name!r} has {len(row)} values, schema has {arity}")
            for value, kind in zip(row, kinds):
                check_value(value, kind)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_records(cls, name: str, schema: Schema, records: Iterable[Sequence]) -> "Table":
        return cls(name, schema, tuple(tuple(r) for r in records))

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list:
        i = self.schema.index(name)
        return [r[i] for r in self.rows]

    @property
    def stats(self):
        """Lazily computed :class:`~semql.core.stats.TableStats` (cached)."""
        if not self._stats:
            from semql.core.stats import compute_stats

            self._stats.append(compute_stats(self))
        return self._stats[0]
