"""Execution statistics and their JSON form."""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass, field
from typing import Any


@dataclass
class NodeStats:
    node_id: str
    op: str
    rows_in: int = 0
    rows_out: int = 0
    ai_calls: int = 0
    prompt_tokens: int = 0
    wall_ms: float = 0.0


@dataclass
class PredicateStats:
    pred_id: int
    sql: str
    ai: bool
    rows_seen: int = 0
    rows_passed: int = 0
    ai_calls: int = 0
    prompt_tokens: int = 0

    @property
    def selectivity(self) -> float | None:
        return self.rows_passed / self.rows_seen if self.rows_seen else None

    @property
    def mean_cost(self) -> float:
        """Prompt tokens per evaluated row for AI predicates, one unit for cheap ones."""
        if not self.rows_seen:
            return 0.0
        return self.prompt_tokens / self.rows_seen if self.ai else 1.0

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        sel = self.selectivity
        d["selectivity"] = None if sel is None else round(sel, 6)
        d["mean_cost"] = round(self.mean_cost, 6)
        return d


@dataclass
class CascadeSummary:
    pred_id: int
    sql: str
    rows: int
    proxy_calls: int
    oracle_calls: int
    oracle_budget: int
    by_source: dict[str, int]
    tau_low: float
    tau_high: float
    proxy_errors: int = 0
    oracle_errors: int = 0

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["tau_low"] = round(self.tau_low, 6)
        d["tau_high"] = round(self.tau_high, 6)
        return d


@dataclass
class ExecStats:
    nodes: list[NodeStats] = field(default_factory=list)
    predicates: dict[int, PredicateStats] = field(default_factory=dict)
    cascades: list[CascadeSummary] = field(default_factory=list)
    counters: dict[str, int] = field(
        default_factory=lambda: {"truncations": 0, "label_hallucination": 0, "oracle_errors": 0, "proxy_errors": 0}
    )
    provider_calls: dict[str, int] = field(default_factory=dict)
    reorders: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def ai_calls(self) -> int:
        return sum(n.ai_calls for n in self.nodes)

    @property
    def prompt_tokens(self) -> int:
        return sum(n.prompt_tokens for n in self.nodes)

    def node(self, node_id: str) -> NodeStats:
        return next(n for n in self.nodes if n.node_id == node_id)

    def count_call(self, node: NodeStats, pred: PredicateStats | None, prompt_tokens: int) -> None:
        with self._lock:
            node.ai_calls += 1
            node.prompt_tokens += prompt_tokens
            if pred is not None:
                pred.ai_calls += 1
                pred.prompt_tokens += prompt_tokens

    def bump(self, counter: str, n: int = 1) -> None:
        with self._lock:
            self.counters[counter] = self.counters.get(counter, 0) + n

    def to_dict(self, timing: bool = True) -> dict[str, Any]:
        """Stable JSON shape; ``timing=False`` drops wall-clock fields for comparisons."""
        nodes = []
        for n in self.nodes:
            d = asdict(n)
            if timing:
                d["wall_ms"] = round(n.wall_ms, 3)
            else:
                del d["wall_ms"]
            nodes.append(d)
        return {
            "ai_calls": self.ai_calls,
            "prompt_tokens": self.prompt_tokens,
            "nodes": nodes,
            "predicates": [self.predicates[k].to_dict() for k in sorted(self.predicates)],
            "cascade": [c.to_dict() for c in self.cascades],
            "counters": dict(sorted(self.counters.items())),
            "provider_calls": dict(sorted(self.provider_calls.items())),
            "reorders": self.reorders,
        }

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True)
