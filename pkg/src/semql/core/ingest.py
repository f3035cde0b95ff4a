"""Table ingestion from CSV and JSONL files.

CSV: the header row names the columns; each column's kind is inferred as
Int, then Float, then Text. Cells holding ``file://`` URIs become
:class:`FileRef` values, with metadata read from a sidecar
``<path>.meta.json``. Empty cells are NULL.

JSONL: one JSON object per row. Kinds come from the JSON types; an object
with ``uri`` and ``mime_type`` keys is a FileRef.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Any
from urllib.parse import unquote, urlparse

from semql.core.values import Column, FileRef, Schema, Table, ValueKind


def _file_ref_from_uri(uri: str, base_dir: Path) -> FileRef:
    parsed = urlparse(uri)
    path = Path(unquote(parsed.netloc + parsed.path))
    if not path.is_absolute():
        path = base_dir / path
    sidecar = Path(str(path) + ".meta.json")
    meta: dict[str, Any] = {}
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
    size = meta.get("size_bytes")
    if size is None:
        size = path.stat().st_size if path.exists() else 0
    return FileRef(
        uri=uri,
        mime_type=str(meta.get("mime_type", "application/octet-stream")).lower(),
        size_bytes=int(size),
        created_at=float(meta.get("created_at", 0.0)),
    )


def _infer_kind(cells: list[str]) -> ValueKind:
    values = [c for c in cells if c != ""]
    if values and all(v.startswith("file://") for v in values):
        return ValueKind.FILE
    for kind, conv in ((ValueKind.INT, int), (ValueKind.FLOAT, float)):
        try:
            for v in values:
                conv(v)
        except ValueError:
            continue
        if kind is ValueKind.FLOAT and any(v.lower() in ("nan", "inf", "-inf", "infinity") for v in values):
            break
        return kind
    return ValueKind.TEXT


def read_csv(path: str | os.PathLike, name: str | None = None) -> Table:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: missing header row") from None
        raw = [row for row in reader if row]
    for i, row in enumerate(raw):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {i + 2} has {len(row)} cells, header has {len(header)}")
    kinds = [_infer_kind([r[j] for r in raw]) for j in range(len(header))]
    convert = {
        ValueKind.INT: int,
        ValueKind.FLOAT: float,
        ValueKind.TEXT: str,
        ValueKind.FILE: lambda s: _file_ref_from_uri(s, path.parent),
    }
    rows = []
    for r in raw:
        rows.append(tuple(None if cell == "" else convert[k](cell) for cell, k in zip(r, kinds)))
    schema = Schema(tuple(Column(h.strip(), k) for h, k in zip(header, kinds)))
    return Table(name or path.stem, schema, tuple(rows))


def _json_value(v: Any) -> Any:
    if isinstance(v, dict):
        if "uri" in v and "mime_type" in v:
            return FileRef(
                uri=v["uri"],
                mime_type=str(v["mime_type"]).lower(),
                size_bytes=int(v.get("size_bytes", 0)),
                created_at=float(v.get("created_at", 0.0)),
            )
        raise ValueError(f"nested objects are not supported: {v!r}")
    if isinstance(v, list):
        raise ValueError("array values are not supported")
    return v


def _json_kind(values: list[Any]) -> ValueKind:
    kinds = set()
    for v in values:
        if v is None:
            continue
        if isinstance(v, bool):
            kinds.add(ValueKind.BOOL)
        elif isinstance(v, int):
            kinds.add(ValueKind.INT)
        elif isinstance(v, float):
            kinds.add(ValueKind.FLOAT)
        elif isinstance(v, FileRef):
            kinds.add(ValueKind.FILE)
        else:
            kinds.add(ValueKind.TEXT)
    if not kinds:
        return ValueKind.TEXT
    if kinds == {ValueKind.INT, ValueKind.FLOAT}:
        return ValueKind.FLOAT
    if len(kinds) > 1:
        raise ValueError(f"column mixes kinds {sorted(k.value for k in kinds)}")
    return kinds.pop()


def read_jsonl(path: str | os.PathLike, name: str | None = None) -> Table:
    path = Path(path)
    records: list[dict] = []
    names: list[str] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise ValueError(f"{path}:{lineno}: expected a JSON object")
            for k in obj:
                if k not in names:
                    names.append(k)
            records.append({k: _json_value(v) for k, v in obj.items()})
    columns = {n: [r.get(n) for r in records] for n in names}
    kinds = {n: _json_kind(vals) for n, vals in columns.items()}
    rows = []
    for r in records:
        row = []
        for n in names:
            v = r.get(n)
            if kinds[n] is ValueKind.FLOAT and isinstance(v, int) and not isinstance(v, bool):
                v = float(v)
            row.append(v)
        rows.append(tuple(row))
    schema = Schema(tuple(Column(n, kinds[n]) for n in names))
    return Table(name or path.stem, schema, tuple(rows))


def write_jsonl(table: Table, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in table.rows:
            obj = {}
            for col, v in zip(table.schema, row):
                if isinstance(v, FileRef):
                    v = {"uri": v.uri, "mime_type": v.mime_type, "size_bytes": v.size_bytes, "created_at": v.created_at}
                obj[col.name] = v
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def read_table(path: str | os.PathLike, name: str | None = None) -> Table:
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return read_csv(path, name)
    if suffix in (".jsonl", ".ndjson"):
        return read_jsonl(path, name)
    raise ValueError(f"unsupported table file {path}")


def load_catalog(directory: str | os.PathLike) -> dict[str, Table]:
    """Load every ``*.csv`` / ``*.jsonl`` file in ``directory``, keyed by lower-cased stem."""
    catalog: dict[str, Table] = {}
    for p in sorted(Path(directory).iterdir()):
        if p.suffix.lower() in (".csv", ".jsonl", ".ndjson") and not p.name.endswith(".meta.json"):
            table = read_table(p)
            catalog[table.name.lower()] = table
    return catalog
