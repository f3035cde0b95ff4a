"""Semantic join to multi-label classification rewrite."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Protocol

from semql.core.prompt import PLACEHOLDER_RE, fill_placeholders
from semql.core.tokens import estimate_tokens
from semql.core.values import ColumnRef, ValueKind, render_value
from semql.errors import LabelOverflow, OracleUnavailable, ProviderError
from semql.planner.cost import StatsView
from semql.planner.plan import LABEL_COLUMN, Classify, Join, PlanNode, output_columns
from semql.planner.shape import decompose, stack

MAX_LABEL_DISTINCT = 1000
MAX_LABEL_TOKENS = 16
MAX_LABELS_PER_CALL = 250
DEFAULT_CLASSIFY_INSTRUCTION = (
    "Return every candidate label for which the statement below is true when <label> is replaced by that label."
)

# a label placeholder introduced by a membership or copular phrase
_MEMBERSHIP_RE = re.compile(
    r"\b(is|are|was|were|be|belongs?\s+to|mapped\s+to|maps?\s+to|in|into|under|as|of\s+type|"
    r"categor(?:y|ies|ized\s+as)|class(?:ified\s+as)?|label(?:l?ed(?:\s+as)?)?|topic|about|mentions?)"
    r"\s+(?:(?:the|a|an|category|class|label|topic|type)\s+)*\{(\d+)\}",
    re.IGNORECASE,
)


@dataclass(frozen=True)
class BindingInfo:
    index: int
    side: str
    column: ColumnRef
    distinct_count: int
    avg_token_count: float
    max_token_count: int
    sample_values: tuple


@dataclass(frozen=True)
class RewriteRequest:
    template: str
    bindings: tuple[BindingInfo, BindingInfo]


@dataclass(frozen=True)
class RewriteDecision:
    rewrite: bool
    label_side: str | None = None


@dataclass(frozen=True)
class RewritePlan:
    label_side: str  # "left" or "right" input of the join
    row_binding: int
    label_binding: int
    label_column: ColumnRef
    row_column: ColumnRef


class RewriteOracle(Protocol):
    def decide(self, request: RewriteRequest) -> RewriteDecision: ...


def membership_indices(template: str) -> set[int]:
    return {int(m.group(2)) for m in _MEMBERSHIP_RE.finditer(template)}


class HeuristicOracle:
    """Affirms when one side looks like a short, low-cardinality label set
    that the prompt mentions in a membership phrase."""

    def __init__(self, max_distinct: int = MAX_LABEL_DISTINCT, max_tokens: float = MAX_LABEL_TOKENS):
        self.max_distinct = max_distinct
        self.max_tokens = max_tokens

    def decide(self, request: RewriteRequest) -> RewriteDecision:
        phrased = membership_indices(request.template)
        candidates = [
            b
            for b in request.bindings
            if b.distinct_count <= self.max_distinct and b.avg_token_count <= self.max_tokens and b.index in phrased
        ]
        if not candidates:
            return RewriteDecision(False)
        best = min(candidates, key=lambda b: (b.distinct_count, b.index))
        return RewriteDecision(True, best.side)


class LlmOracle:
    """Asks a model, through the RewriteOracle task, whether the join is a classification.

    The reply must be JSON ``{"rewrite": bool, "label_side": "left"|"right"}``.
    Any failure falls back to ``fallback``.
    """

    def __init__(self, provider, model: str = "default", fallback: RewriteOracle | None = None):
        self.provider = provider
        self.model = model
        self.fallback = fallback or HeuristicOracle()
        self.fallbacks = 0

    def prompt(self, request: RewriteRequest) -> str:
        doc = {
            "join_predicate": request.template,
            "bindings": [
                {
                    "placeholder": b.index,
                    "side": b.side,
                    "column": str(b.column),
                    "distinct_count": b.distinct_count,
                    "avg_token_count": b.avg_token_count,
                    "sample_values": [render_value(v) for v in b.sample_values],
                }
                for b in request.bindings
            ],
        }
        return (
            "Decide whether this semantic join can be answered as multi-label classification of one "
            "side's rows against the other side's values. Reply with JSON "
            '{"rewrite": true|false, "label_side": "left"|"right"}.\n' + json.dumps(doc, sort_keys=True)
        )

    def ask(self, request: RewriteRequest) -> RewriteDecision:
        from semql.models.base import ModelRequest, Task

        try:
            resp = self.provider.invoke(ModelRequest(Task.REWRITE_ORACLE, self.model, self.prompt(request)))
            doc = json.loads(resp.text)
            rewrite = bool(doc["rewrite"])
            side = doc.get("label_side")
            if rewrite and side not in ("left", "right"):
                raise ValueError(f"bad label_side {side!r}")
            return RewriteDecision(rewrite, side if rewrite else None)
        except (ProviderError, ValueError, KeyError, TypeError) as exc:
            raise OracleUnavailable(str(exc)) from exc

    def decide(self, request: RewriteRequest) -> RewriteDecision:
        try:
            return self.ask(request)
        except OracleUnavailable:
            self.fallbacks += 1
            return self.fallback.decide(request)


def _binding_info(index: int, ref: ColumnRef, side: str, stats: StatsView) -> BindingInfo:
    st = stats.column(ref)
    if st is None:
        return BindingInfo(index, side, ref, 0, 0.0, 0, ())
    return BindingInfo(index, side, ref, st.distinct_count, st.avg_token_count, st.max_token_count, st.sample_values)


def rewrite_request(join: Join, stats: StatsView) -> RewriteRequest | None:
    """Precondition check: a pure semantic join whose prompt binds one column per side."""
    if join.ai_pred is None or join.equi_keys:
        return None
    call = join.ai_pred.ai
    if len(call.prompt.bindings) != 2:
        return None
    left = {c.ref for c in output_columns(join.left)}
    right = {c.ref for c in output_columns(join.right)}
    infos = []
    for i, b in enumerate(call.prompt.bindings):
        side = "left" if b in left else "right" if b in right else None
        if side is None:
            return None
        infos.append(_binding_info(i, b, side, stats))
    if infos[0].side == infos[1].side:
        return None
    return RewriteRequest(call.prompt.template, tuple(infos))


def detect_classify_rewrite(join: Join, stats: StatsView, oracle: RewriteOracle | None = None) -> RewritePlan | None:
    request = rewrite_request(join, stats)
    if request is None:
        return None
    decision = (oracle or HeuristicOracle()).decide(request)
    if not decision.rewrite:
        return None
    label = next(b for b in request.bindings if b.side == decision.label_side)
    row = next(b for b in request.bindings if b.side != decision.label_side)
    return RewritePlan(decision.label_side, row.index, label.index, label.column, row.column)


def label_chunk_size(instruction_tokens: int, max_row_tokens: int, max_label_tokens: int, window: int) -> int:
    """Labels per call so that instruction, row text and labels fit the window (capped at 250)."""
    room = window - instruction_tokens - max_row_tokens
    if max_label_tokens <= 0:
        return MAX_LABELS_PER_CALL
    if max_label_tokens > room:
        raise LabelOverflow(f"a {max_label_tokens}-token label does not fit the {window}-token window")
    return min(MAX_LABELS_PER_CALL, room // max_label_tokens)


def instruction_tokens(template: str, instruction: str) -> int:
    """Tokens of the fixed prompt text: the instruction plus the template without its placeholders."""
    skeleton = fill_placeholders(template, {int(m.group(1)): "" for m in PLACEHOLDER_RE.finditer(template)})
    return estimate_tokens(instruction + "\n" + skeleton)


def apply_classify_rewrite(
    plan: PlanNode,
    rewrite: RewritePlan,
    stats: StatsView,
    context_window_tokens: int,
    instruction: str = DEFAULT_CLASSIFY_INSTRUCTION,
) -> PlanNode:
    sk = decompose(plan)
    join = sk.join
    call = join.ai_pred.ai
    row_input = stack(sk.left, sk.left_preds) if rewrite.label_side == "right" else stack(sk.right, sk.right_preds)
    label_input = stack(sk.right, sk.right_preds) if rewrite.label_side == "right" else stack(sk.left, sk.left_preds)

    row_st = stats.column(rewrite.row_column)
    label_st = stats.column(rewrite.label_column)
    chunk = label_chunk_size(
        instruction_tokens(call.prompt.template, instruction),
        row_st.max_token_count if row_st else 0,
        label_st.max_token_count if label_st else 0,
        context_window_tokens,
    )
    distinct = label_st.distinct_count if label_st else 1
    label_kind = next(
        (c.kind for c in output_columns(label_input) if c.ref == rewrite.label_column), ValueKind.TEXT
    )
    classify = Classify(
        prompt=call.prompt,
        row_binding=rewrite.row_binding,
        label_binding=rewrite.label_binding,
        label_column=rewrite.label_column,
        labels=label_input,
        chunk_size=chunk,
        instruction=instruction,
        model=call.model or call.option("model"),
        child=row_input,
        label_kind=label_kind,
        est_chunks=max(1, math.ceil(distinct / chunk)),
        pred_id=join.ai_pred.id,
    )
    new_join = Join(
        equi_keys=((LABEL_COLUMN, rewrite.label_column),),
        ai_pred=None,
        left=classify,
        right=label_input,
        swap_output=rewrite.label_side == "left",
        note="rewritten: classify",
    )
    sk.join = new_join
    sk.left, sk.left_preds = classify, []
    sk.right, sk.right_preds = label_input, []
    return _compose_rewritten(sk)


def _compose_rewritten(sk) -> PlanNode:
    # the new join is complete; only the filters and wrappers above it are re-stacked
    node = stack(sk.join, sk.post)
    for wrapper in reversed(sk.top):
        node = wrapper.with_children(node)
    return node


__all__ = [
    "DEFAULT_CLASSIFY_INSTRUCTION",
    "HeuristicOracle",
    "LlmOracle",
    "RewriteDecision",
    "RewritePlan",
    "RewriteRequest",
    "apply_classify_rewrite",
    "detect_classify_rewrite",
    "label_chunk_size",
]
