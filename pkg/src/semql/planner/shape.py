"""Decomposition of a lowered plan into its scan/filter/join skeleton."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from semql.planner.plan import Aggregate, Filter, Join, PlanNode, Predicate, Project, Scan


@dataclass
class Skeleton:
    """``top`` lists the unary nodes above the filters, outermost first."""

    top: list[PlanNode] = field(default_factory=list)
    post: list[Predicate] = field(default_factory=list)
    join: Join | None = None
    left: PlanNode | None = None  # base of the left (or only) input
    left_preds: list[Predicate] = field(default_factory=list)
    right: PlanNode | None = None
    right_preds: list[Predicate] = field(default_factory=list)

    def side_of(self, pred: Predicate) -> str | None:
        """'left', 'right', or None when the predicate needs both inputs."""
        if self.join is None:
            return "left"
        la = _bindings(self.left)
        ra = _bindings(self.right)
        if pred.aliases <= la:
            return "left"
        if pred.aliases <= ra:
            return "right"
        return None


def _bindings(node: PlanNode) -> frozenset[str]:
    if isinstance(node, Scan):
        return frozenset({node.binding.lower()})
    out: set[str] = set()
    for c in node.children:
        out |= _bindings(c)
    return frozenset(out)


def _peel(node: PlanNode) -> tuple[PlanNode, list[Predicate]]:
    preds = []
    while isinstance(node, Filter):
        preds.append(node.pred)
        node = node.child
    preds.reverse()  # bottom-up evaluation order
    return node, preds


def decompose(plan: PlanNode) -> Skeleton:
    sk = Skeleton()
    node = plan
    while isinstance(node, (Project, Aggregate)):
        sk.top.append(node)
        node = node.child
    node, sk.post = _peel(node)
    if isinstance(node, Join):
        sk.join = node
        sk.left, sk.left_preds = _peel(node.left)
        sk.right, sk.right_preds = _peel(node.right)
    else:
        # single input: what we peeled are the scan's own filters
        sk.left, sk.left_preds = node, sk.post
        sk.post = []
    return sk


def stack(node: PlanNode, preds) -> PlanNode:
    for p in preds:
        node = Filter(pred=p, child=node)
    return node


def compose(sk: Skeleton) -> PlanNode:
    if sk.join is None:
        node = stack(sk.left, sk.left_preds)
    else:
        node = replace(sk.join, left=stack(sk.left, sk.left_preds), right=stack(sk.right, sk.right_preds))
        node = stack(node, sk.post)
    for wrapper in reversed(sk.top):
        node = wrapper.with_children(node)
    return node


__all__ = ["Skeleton", "compose", "decompose", "stack"]
