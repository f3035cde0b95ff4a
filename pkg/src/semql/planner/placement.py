"""Placement of single-side AI predicates below or above the join."""

from __future__ import annotations

from typing import Mapping, Sequence

from semql.planner.cost import PredicateProfile, StatsView
from semql.planner.estimate import annotate, join_rows
from semql.planner.order import sort_key
from semql.planner.plan import PlanNode, Predicate, Scan, total_ai_calls
from semql.planner.shape import Skeleton, compose, decompose

DOWN, UP = "down", "up"
MODES = ("auto", "pullup", "pushdown")


def _base_rows(node: PlanNode, stats: StatsView) -> float:
    if isinstance(node, Scan) and node.table is not None:
        return float(stats.catalog.stats(node.table).row_count)
    return 1.0


class _Placer:
    def __init__(self, sk: Skeleton, profiles: Mapping[int, PredicateProfile], stats: StatsView):
        self.sk = sk
        self.prof = profiles
        self.stats = stats
        self.movable: list[tuple[Predicate, str]] = []
        self.fixed: list[Predicate] = []
        for p in sk.left_preds:
            self.movable.append((p, "left"))
        for p in sk.right_preds:
            self.movable.append((p, "right"))
        for p in sk.post:
            side = sk.side_of(p)
            if side is None:
                self.fixed.append(p)
            else:
                self.movable.append((p, side))
        self.base = {"left": _base_rows(sk.left, stats), "right": _base_rows(sk.right, stats)}

    def key(self, p: Predicate):
        return sort_key(self.prof[p.id])

    def sel(self, p: Predicate) -> float:
        return self.prof[p.id].est_selectivity

    def ai_movable(self) -> list[tuple[Predicate, str]]:
        return sorted([(p, s) for p, s in self.movable if p.is_ai], key=lambda ps: self.key(ps[0]))

    def side_rows(self, side: str, decision: dict, exclude: Predicate | None = None) -> float:
        rows = self.base[side]
        for q, s in self.movable:
            if s == side and q is not exclude and decision.get(q.id, DOWN) == DOWN:
                rows *= self.sel(q)
        return rows

    def down_calls(self, p: Predicate, side: str, decision: dict) -> float:
        rows = self.base[side]
        kp = self.key(p)
        for q, s in self.movable:
            if s == side and q is not p and decision.get(q.id, DOWN) == DOWN and self.key(q) < kp:
                rows *= self.sel(q)
        return rows

    def up_calls(self, p: Predicate, decision: dict) -> float:
        left = self.side_rows("left", decision, exclude=p)
        right = self.side_rows("right", decision, exclude=p)
        rows = join_rows(left, right, self.sk.join.equi_keys, self.stats)
        if self.sk.join.ai_pred is not None:
            rows *= self.sel(self.sk.join.ai_pred)
        kp = self.key(p)
        for q, _ in self.movable:
            if q is not p and decision.get(q.id) == UP and self.key(q) < kp:
                rows *= self.sel(q)
        for q in self.fixed:
            if self.key(q) < kp:
                rows *= self.sel(q)
        return rows

    def greedy(self) -> dict:
        decision = {p.id: DOWN for p, _ in self.movable if not p.is_ai}
        for p, side in self.ai_movable():
            down = self.down_calls(p, side, decision)
            up = self.up_calls(p, decision)
            decision[p.id] = UP if up < down else DOWN
        return decision

    def build(self, decision: dict, reorder: bool) -> Skeleton:
        order = self.key if reorder else (lambda p: p.id)
        sk = self.sk
        left = [p for p, s in self.movable if s == "left" and decision.get(p.id, DOWN) == DOWN]
        right = [p for p, s in self.movable if s == "right" and decision.get(p.id, DOWN) == DOWN]
        post = self.fixed + [p for p, _ in self.movable if decision.get(p.id) == UP]
        return Skeleton(
            top=sk.top,
            post=sorted(post, key=order),
            join=sk.join,
            left=sk.left,
            left_preds=sorted(left, key=order),
            right=sk.right,
            right_preds=sorted(right, key=order),
        )


def place_ai_predicates(
    plan: PlanNode,
    profiles: Sequence[PredicateProfile],
    stats: StatsView,
    mode="auto",
    reorder: bool = True,
) -> PlanNode:
    """Return ``plan`` with every single-side AI predicate below or above its join.

    ``mode`` is ``auto`` (per predicate, the position with fewer estimated
    calls; ties stay below), ``pullup``, ``pushdown``, or an explicit mapping
    from predicate id to ``"up"``/``"down"``.
    """
    prof = {p.pred_id: p for p in profiles}
    sk = decompose(plan)
    if sk.join is None:
        order = (lambda p: sort_key(prof[p.id])) if reorder else (lambda p: p.id)
        sk.left_preds = sorted(sk.left_preds, key=order)
        return compose(sk)
    placer = _Placer(sk, prof, stats)
    if isinstance(mode, Mapping):
        decision = {p.id: DOWN for p, _ in placer.movable if not p.is_ai}
        decision.update({k: v for k, v in mode.items()})
    elif mode == "pushdown":
        decision = {}
    elif mode == "pullup":
        decision = {p.id: (UP if p.is_ai else DOWN) for p, _ in placer.movable}
    elif mode == "auto":
        decision = placer.greedy()
        chosen = compose(placer.build(decision, reorder))
        fallback = compose(placer.build({}, reorder))
        # decisions are made one predicate at a time; never end up worse than all-below
        if _calls(fallback, stats, prof) < _calls(chosen, stats, prof):
            return fallback
        return chosen
    else:
        raise ValueError(f"unknown placement mode {mode!r}; expected one of {MODES}")
    return compose(placer.build(decision, reorder))


def _calls(plan: PlanNode, stats: StatsView, prof) -> float:
    return total_ai_calls(annotate(plan, stats, prof))
