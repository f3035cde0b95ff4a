"""Hierarchical extract/combine/summarize aggregation with a single-call fast path."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from semql.core.tokens import estimate_tokens, truncate_to_tokens
from semql.models.base import Task

DEFAULT_BATCH_TOKENS = 3072

# llm(task, prompt) -> text
LlmFn = Callable[[Task, str], str]

_HEADERS = {
    Task.EXTRACT: "Extract the information from these rows that matters for the final answer.",
    Task.COMBINE: "Merge these intermediate notes into one, keeping what matters and dropping repetition.",
    Task.SUMMARIZE: "Write the final answer from these notes.",
    Task.FAST_AGGREGATE: "Answer directly from these rows.",
}


def build_prompt(task: Task, texts: Sequence[str], instruction: str | None) -> str:
    head = _HEADERS[task]
    if instruction:
        head += f"\nTask: {instruction}"
    return head + "\n\n" + "\n---\n".join(texts)


@dataclass
class _Buffer:
    texts: list[str] = field(default_factory=list)
    sizes: list[int] = field(default_factory=list)

    @property
    def tokens(self) -> int:
        return sum(self.sizes)

    def add(self, text: str, front: bool = False) -> None:
        size = estimate_tokens(text)
        if front:
            self.texts.insert(0, text)
            self.sizes.insert(0, size)
        else:
            self.texts.append(text)
            self.sizes.append(size)

    def take(self, n: int | None = None) -> list[str]:
        n = len(self.texts) if n is None else n
        out = self.texts[:n]
        del self.texts[:n]
        del self.sizes[:n]
        return out

    def __len__(self) -> int:
        return len(self.texts)


class AggState:
    """Row buffer R and state buffer S, both measured in estimated tokens."""

    def __init__(self, llm: LlmFn, batch_size_tokens: int = DEFAULT_BATCH_TOKENS, instruction: str | None = None):
        if batch_size_tokens < 1:
            raise ValueError("batch_size_tokens must be positive")
        self.llm = llm
        self.batch = batch_size_tokens
        self.instruction = instruction
        self.R = _Buffer()
        self.S = _Buffer()
        self.calls = 0
        self.truncations = 0
        self.rows = 0
        self.trace: list[tuple[Task, int]] = []  # (task, number of input texts)

    def _call(self, task: Task, texts: Sequence[str]) -> str:
        self.calls += 1
        self.trace.append((task, len(texts)))
        return self.llm(task, build_prompt(task, texts, self.instruction))

    def _extract_rows(self) -> None:
        self.S.add(self._call(Task.EXTRACT, self.R.take()))

    def _combine_once(self) -> None:
        # largest prefix that fits the window, but always at least two states
        m, total = 0, 0
        for size in self.S.sizes:
            if total + size > self.batch:
                break
            total += size
            m += 1
        m = max(2, m)
        self.S.add(self._call(Task.COMBINE, self.S.take(m)), front=True)

    def push(self, text: str) -> None:
        self.rows += 1
        size = estimate_tokens(text)
        if size > self.batch:
            if len(self.R):
                self._extract_rows()
            self.truncations += 1
            self.S.add(self._call(Task.EXTRACT, [truncate_to_tokens(text, self.batch)]))
        else:
            if self.R.tokens + size > self.batch:
                self._extract_rows()
            self.R.add(text)
        while self.S.tokens > self.batch and len(self.S) > 1:
            self._combine_once()

    def finalize(self) -> str:
        if self.rows == 0:
            return ""
        if len(self.R) and not len(self.S):
            return self._call(Task.FAST_AGGREGATE, self.R.take())
        if len(self.R):
            self._extract_rows()
        while len(self.S) > 1:
            self._combine_once()
        return self._call(Task.SUMMARIZE, self.S.take())


def aggregate(texts: Iterable[str | None], llm: LlmFn, batch_size_tokens: int = DEFAULT_BATCH_TOKENS, instruction: str | None = None) -> tuple[str, AggState]:
    """Fold ``texts`` in order; NULLs are skipped without a call."""
    state = AggState(llm, batch_size_tokens, instruction)
    for t in texts:
        if t is not None:
            state.push(t)
    return state.finalize(), state


def group_aggregate(rows: Iterable[tuple[tuple, str | None]], llm: LlmFn, batch_size_tokens: int = DEFAULT_BATCH_TOKENS, instruction: str | None = None) -> dict[tuple, str]:
    """One independent aggregate per group key, rows fed in input order."""
    states: dict[tuple, AggState] = {}
    for key, text in rows:
        st = states.setdefault(key, AggState(llm, batch_size_tokens, instruction))
        if text is not None:
            st.push(text)
    return {k: st.finalize() for k, st in states.items()}
