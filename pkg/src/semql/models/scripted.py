"""Record and replay of model traffic as JSONL fixtures."""

from __future__ import annotations

import json
import os
import threading
import warnings
from typing import Iterable

from semql.errors import FixtureParseError, ProviderError
from semql.models.base import ModelRequest, ModelResponse, Provider, Task

_FIELDS = ("task", "model", "digest", "response")


def parse_fixture_line(line: str, lineno: int) -> tuple[tuple[str, str, str], ModelResponse]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FixtureParseError(f"invalid JSON: {exc.msg}", lineno) from None
    if not isinstance(obj, dict):
        raise FixtureParseError("expected a JSON object", lineno)
    missing = [f for f in _FIELDS if f not in obj]
    if missing:
        raise FixtureParseError(f"missing fields {missing}", lineno)
    try:
        task = Task(obj["task"]).value
        resp = ModelResponse.from_dict(obj["response"])
    except (ValueError, TypeError, AttributeError) as exc:
        raise FixtureParseError(str(exc), lineno) from None
    return (task, str(obj["model"]), str(obj["digest"])), resp


class ScriptedProvider(Provider):
    """Answers by exact lookup on ``(task, model, digest)``.

    On duplicate keys the last entry wins and a warning is emitted. A
    request with no entry fails with a non-retryable error.
    """

    name = "scripted"

    def __init__(self, table: dict | None = None, name: str | None = None):
        super().__init__(name)
        self.table: dict[tuple[str, str, str], ModelResponse] = dict(table or {})

    @classmethod
    def from_file(cls, path: str | os.PathLike, name: str | None = None) -> "ScriptedProvider":
        with open(path, encoding="utf-8") as fh:
            return cls.from_lines(fh, name=name, source=str(path))

    @classmethod
    def from_lines(cls, lines: Iterable[str], name: str | None = None, source: str = "<fixture>") -> "ScriptedProvider":
        table: dict = {}
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            key, resp = parse_fixture_line(line, lineno)
            if key in table:
                warnings.warn(f"{source}:{lineno}: duplicate fixture key {key[:2]}; last entry wins", stacklevel=2)
            table[key] = resp
        return cls(table, name=name)

    @classmethod
    def from_records(cls, records: Iterable[dict], name: str | None = None) -> "ScriptedProvider":
        return cls.from_lines((json.dumps(r) for r in records), name=name)

    def _invoke(self, req: ModelRequest) -> ModelResponse:
        resp = self.table.get(req.key)
        if resp is None:
            raise ProviderError(
                f"no fixture entry for {req.task.value} on model {req.model_name!r} (digest {req.digest[:12]})",
                retryable=False,
            )
        return resp


class RecordingProvider(Provider):
    """Pass-through that appends every successful exchange as a fixture record."""

    def __init__(self, inner: Provider, path: str | os.PathLike | None = None, name: str | None = None):
        super().__init__(name or inner.name)
        self.inner = inner
        self.path = path
        self.records: list[dict] = []
        self._lock = threading.Lock()

    def _invoke(self, req: ModelRequest) -> ModelResponse:
        resp = self.inner.invoke(req)
        record = {
            "task": req.task.value,
            "model": req.model_name,
            "digest": req.digest,
            "response": resp.to_dict(),
        }
        with self._lock:
            self.records.append(record)
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, sort_keys=True) + "\n")
        return resp

    def replay(self, name: str | None = None) -> ScriptedProvider:
        return ScriptedProvider.from_records(self.records, name=name or self.name)
