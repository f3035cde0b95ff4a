"""Provider contract: requests, responses, and per-model call accounting."""

from __future__ import annotations

import hashlib
import threading
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Sequence

from semql.core.tokens import estimate_tokens


class Task(str, Enum):
    COMPLETE = "Complete"
    FILTER_BOOL = "FilterBool"
    CLASSIFY_MULTI = "ClassifyMulti"
    EXTRACT = "Extract"
    COMBINE = "Combine"
    SUMMARIZE = "Summarize"
    FAST_AGGREGATE = "FastAggregate"
    REWRITE_ORACLE = "RewriteOracle"


@dataclass(frozen=True)
class ModelRequest:
    task: Task
    model_name: str
    prompt: str
    labels: tuple[str, ...] | None = None
    max_output_tokens: int = 256

    def __post_init__(self) -> None:
        object.__setattr__(self, "task", Task(self.task))
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
        if self.task is Task.CLASSIFY_MULTI:
            if not self.labels:
                raise ValueError("ClassifyMulti requires a non-empty label list")
        elif self.labels:
            raise ValueError(f"labels are only allowed for ClassifyMulti, not {self.task.value}")

    @property
    def digest(self) -> str:
        return request_digest(self.prompt, self.labels)

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.task.value, self.model_name, self.digest)


def request_digest(prompt: str, labels: Sequence[str] | None = None) -> str:
    h = hashlib.sha256(prompt.encode("utf-8"))
    for label in sorted(labels or ()):
        h.update(b"\x1f")
        h.update(label.encode("utf-8"))
    return h.hexdigest()


@dataclass(frozen=True)
class ModelResponse:
    text: str = ""
    bool_value: bool | None = None
    labels: tuple[str, ...] | None = None
    confidence: float | None = None
    usage: tuple[int, int] = (0, 0)

    def __post_init__(self) -> None:
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "usage", tuple(self.usage))
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["labels"] = list(self.labels) if self.labels is not None else None
        d["usage"] = list(self.usage)
        return {k: v for k, v in d.items() if v is not None}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ModelResponse":
        unknown = set(d) - {"text", "bool_value", "labels", "confidence", "usage"}
        if unknown:
            raise ValueError(f"unknown response fields {sorted(unknown)}")
        return cls(
            text=d.get("text", ""),
            bool_value=d.get("bool_value"),
            labels=d.get("labels"),
            confidence=d.get("confidence"),
            usage=tuple(d.get("usage", (0, 0))),
        )


@dataclass
class ModelCounters:
    call_count: int = 0
    total_prompt_tokens: int = 0
    total_output_tokens: int = 0


@dataclass
class ProviderStats:
    """Monotone per-model counters; safe to update from many threads."""

    models: dict[str, ModelCounters] = field(default_factory=dict)
    label_hallucination: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record(self, model: str, prompt_tokens: int, output_tokens: int) -> None:
        with self._lock:
            c = self.models.setdefault(model, ModelCounters())
            c.call_count += 1
            c.total_prompt_tokens += prompt_tokens
            c.total_output_tokens += output_tokens

    def add_hallucinations(self, n: int) -> None:
        with self._lock:
            self.label_hallucination += n

    @property
    def call_count(self) -> int:
        with self._lock:
            return sum(c.call_count for c in self.models.values())

    @property
    def prompt_tokens(self) -> int:
        with self._lock:
            return sum(c.total_prompt_tokens for c in self.models.values())

    def snapshot(self) -> dict[str, Any]:
        with self._lock:
            return {
                "models": {m: asdict(c) for m, c in sorted(self.models.items())},
                "label_hallucination": self.label_hallucination,
            }


class Provider:
    """Base class. Subclasses implement ``_invoke``; ``invoke`` adds the contract.

    Successful calls are counted once here. ClassifyMulti answers are
    restricted to the requested labels, and anything else is dropped and
    counted as a hallucination.
    """

    name = "provider"

    def __init__(self, name: str | None = None):
        if name is not None:
            self.name = name
        self.stats = ProviderStats()

    def _invoke(self, req: ModelRequest) -> ModelResponse:
        raise NotImplementedError

    def invoke(self, req: ModelRequest) -> ModelResponse:
        resp = self._invoke(req)
        if req.task is Task.CLASSIFY_MULTI:
            resp = self._normalize_labels(req, resp)
        prompt_tokens, output_tokens = resp.usage
        if prompt_tokens == 0 and output_tokens == 0:
            prompt_tokens = estimate_tokens(req.prompt) + sum(estimate_tokens(l) for l in req.labels or ())
            output_tokens = estimate_tokens(resp.text)
            resp = ModelResponse(resp.text, resp.bool_value, resp.labels, resp.confidence, (prompt_tokens, output_tokens))
        self.stats.record(req.model_name, prompt_tokens, output_tokens)
        return resp

    def _normalize_labels(self, req: ModelRequest, resp: ModelResponse) -> ModelResponse:
        allowed = set(req.labels)
        got = list(resp.labels or ())
        kept = [l for l in dict.fromkeys(got) if l in allowed]
        dropped = sum(1 for l in got if l not in allowed)
        if dropped:
            self.stats.add_hallucinations(dropped)
        return ModelResponse(resp.text, resp.bool_value, tuple(kept), resp.confidence, resp.usage)


class CallableProvider(Provider):
    """Wrap a plain function ``ModelRequest -> ModelResponse``."""

    def __init__(self, fn, name: str = "callable"):
        super().__init__(name)
        self.fn = fn

    def _invoke(self, req: ModelRequest) -> ModelResponse:
        return self.fn(req)
