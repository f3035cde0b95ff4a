"""PROMPT objects: natural-language templates with positional ``{i}`` placeholders."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Sequence

from semql.core.values import ColumnRef, render_value
from semql.errors import ArityMismatch

PLACEHOLDER_RE = re.compile(r"\{(\d+)\}")


@dataclass(frozen=True)
class PromptTemplate:
    template: str
    bindings: tuple[ColumnRef, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "bindings", tuple(self.bindings))
        used = self.placeholders()
        n = len(self.bindings)
        for idx in used:
            if idx >= n:
                raise ArityMismatch(f"placeholder {{{idx}}} has no binding ({n} bound)")
        unused = set(range(n)) - used
        if unused:
            raise ArityMismatch(f"bindings {sorted(unused)} are never referenced in {self.template!r}")

    def placeholders(self) -> set[int]:
        return {int(m.group(1)) for m in PLACEHOLDER_RE.finditer(self.template)}

    def render(self, values: Sequence[Any]) -> str:
        return render_prompt(self, values)


def render_prompt(t: PromptTemplate, row_values: Sequence[Any]) -> str:
    """Substitute placeholders verbatim; other braces are left untouched."""
    if len(row_values) != len(t.bindings):
        raise ArityMismatch(f"template expects {len(t.bindings)} values, got {len(row_values)}")
    texts = [render_value(v) for v in row_values]
    return PLACEHOLDER_RE.sub(lambda m: texts[int(m.group(1))], t.template)


def fill_placeholders(template: str, replacements: dict[int, str]) -> str:
    """Substitute only the given placeholder indices, leaving the others in place."""

    def sub(m: re.Match) -> str:
        idx = int(m.group(1))
        return replacements.get(idx, m.group(0))

    return PLACEHOLDER_RE.sub(sub, template)


LABEL_SLOT = "<label>"


def classify_prompt(t: PromptTemplate, values: dict[int, Any], label_index: int, instruction: str | None = None) -> str:
    """Render a template for multi-label classification.

    Every binding except ``label_index`` is filled from ``values``; the label
    placeholder becomes ``<label>`` and the candidates travel with the request.
    """
    texts = {i: render_value(v) for i, v in values.items()}
    texts[label_index] = LABEL_SLOT
    body = fill_placeholders(t.template, texts)
    return f"{instruction}\n{body}" if instruction else body
