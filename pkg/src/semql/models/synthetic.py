"""Deterministic offline providers for tests and benchmarks."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from statistics import NormalDist
from typing import Callable, Mapping

from semql.core.prompt import LABEL_SLOT, PLACEHOLDER_RE
from semql.errors import ProviderError
from semql.models.base import ModelRequest, ModelResponse, Provider, Task

_NORMAL = NormalDist()


def hash_uniform(seed: int, *parts) -> float:
    """Uniform in (0, 1), a pure function of the seed and the parts."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(seed).encode())
    for p in parts:
        h.update(b"\x1f")
        h.update(str(p).encode("utf-8"))
    return (int.from_bytes(h.digest(), "big") + 0.5) / 2.0**64


def stub_text(req: ModelRequest, tokens: int = 8) -> str:
    """Deterministic filler of exactly ``tokens`` estimated tokens."""
    seed = f"{req.task.value.lower()}:{req.digest}"
    body = (seed * (tokens * 4 // len(seed) + 1))[: tokens * 4]
    return body


@dataclass(frozen=True)
class AccuracyProfile:
    """How a simulated boolean model errs and how confident it claims to be.

    ``peaked``: right answers carry confidence near 1, wrong ones near 0.5.
    ``calibrated``: confidence c is drawn first and the answer is right with
    probability c, so stated confidence equals accuracy.
    ``oracle``: always right with confidence 1.
    """

    p_correct: float
    kind: str = "peaked"
    sharpness: float = 32.0
    hard_spread: float = 0.1
    noise: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_correct <= 1.0:
            raise ValueError("p_correct must lie in [0, 1]")
        if self.kind not in ("peaked", "calibrated", "oracle"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "calibrated" and self.p_correct < 0.5:
            raise ValueError("a calibrated profile needs p_correct >= 0.5")

    def draw(self, seed: int, key: str) -> tuple[bool, float]:
        """Return (answer is correct, stated confidence in that answer)."""
        if self.kind == "oracle":
            return True, 1.0
        u = hash_uniform(seed, "correct", key)
        w = hash_uniform(seed, "conf", key)
        if self.kind == "calibrated":
            if self.p_correct >= 1.0:
                c = 1.0
            elif self.p_correct <= 0.5:
                c = 0.5
            else:
                a = 0.5 / (self.p_correct - 0.5) - 1.0
                c = 0.5 + 0.5 * w**a
            correct = u < c
        else:
            correct = u < self.p_correct
            if correct:
                c = 1.0 - 0.5 * w**self.sharpness
            else:
                c = 0.5 + self.hard_spread * w
        if self.noise:
            z = _NORMAL.inv_cdf(hash_uniform(seed, "noise", key))
            c = c + self.noise * z
        return correct, min(1.0, max(0.5, c))


ORACLE = AccuracyProfile(1.0, "oracle")


class SyntheticBooleanProvider(Provider):
    """FilterBool answers simulated from a ground truth keyed by prompt."""

    def __init__(
        self,
        ground_truth: Mapping[str, bool] | Callable[[str], bool],
        profile: AccuracyProfile = ORACLE,
        seed: int = 0,
        name: str = "synthetic",
    ):
        super().__init__(name)
        self.truth = ground_truth
        self.profile = profile
        self.seed = seed

    def _lookup(self, prompt: str) -> bool:
        if callable(self.truth):
            return bool(self.truth(prompt))
        try:
            return bool(self.truth[prompt])
        except KeyError:
            raise ProviderError(f"no ground truth for prompt {prompt[:60]!r}", retryable=False) from None

    def _invoke(self, req: ModelRequest) -> ModelResponse:
        if req.task is not Task.FILTER_BOOL:
            raise ProviderError(f"synthetic provider only answers FilterBool, got {req.task.value}", retryable=False)
        truth = self._lookup(req.prompt)
        correct, conf = self.profile.draw(self.seed, req.prompt)
        answer = truth if correct else not truth
        return ModelResponse(text="true" if answer else "false", bool_value=answer, confidence=conf)


def _template_regex(template: str, label_index: int | None = None) -> re.Pattern:
    parts = []
    seen: set[int] = set()
    pos = 0
    for m in PLACEHOLDER_RE.finditer(template):
        parts.append(re.escape(template[pos : m.start()]))
        idx = int(m.group(1))
        if idx == label_index:
            parts.append(re.escape(LABEL_SLOT))
        elif idx in seen:
            parts.append(f"(?P=p{idx})")
        else:
            parts.append(f"(?P<p{idx}>.*?)")
            seen.add(idx)
        pos = m.end()
    parts.append(re.escape(template[pos:]))
    return re.compile("".join(parts) + r"\Z", re.DOTALL)


class ConsistentProvider(Provider):
    """Answers FilterBool and ClassifyMulti from one truth function.

    ``truth`` receives the placeholder values of ``template`` as a dict
    ``{index: text}``. A ClassifyMulti request returns exactly the labels
    whose FilterBool prompt would be answered true, so a rewritten semantic
    join and its cross-join form agree row for row. Generative tasks get a
    deterministic stub text.
    """

    def __init__(
        self,
        template: str,
        truth: Callable[[dict[int, str]], bool],
        label_index: int | None = None,
        name: str = "consistent",
        output_tokens: int = 8,
    ):
        super().__init__(name)
        self.template = template
        self.truth = truth
        self.label_index = label_index
        self.output_tokens = output_tokens
        self._filter_re = _template_regex(template)
        self._classify = {}

    def _values(self, pattern: re.Pattern, prompt: str) -> dict[int, str]:
        # classification prompts may carry an instruction line in front
        for start in [0] + [i + 1 for i, ch in enumerate(prompt) if ch == "\n"]:
            m = pattern.match(prompt, start)
            if m:
                return {int(k[1:]): v for k, v in m.groupdict().items()}
        raise ProviderError(f"prompt does not match template {self.template!r}", retryable=False)

    def _classify_re(self, label_index: int) -> re.Pattern:
        if label_index not in self._classify:
            self._classify[label_index] = _template_regex(self.template, label_index)
        return self._classify[label_index]

    def _invoke(self, req: ModelRequest) -> ModelResponse:
        if req.task is Task.FILTER_BOOL:
            ok = bool(self.truth(self._values(self._filter_re, req.prompt)))
            return ModelResponse(text="true" if ok else "false", bool_value=ok, confidence=1.0)
        if req.task is Task.CLASSIFY_MULTI:
            indices = sorted({int(m.group(1)) for m in PLACEHOLDER_RE.finditer(self.template)})
            candidates = [self.label_index] if self.label_index is not None else indices
            for li in candidates:
                try:
                    values = self._values(self._classify_re(li), req.prompt)
                except ProviderError:
                    continue
                hits = [l for l in req.labels if self.truth({**values, li: l})]
                return ModelResponse(text=", ".join(hits), labels=tuple(hits), confidence=1.0)
            raise ProviderError(f"prompt does not match template {self.template!r}", retryable=False)
        return ModelResponse(text=stub_text(req, self.output_tokens))


class NoisyFilterProvider(Provider):
    """Flips a seeded fraction of negative FilterBool answers to positive."""

    def __init__(self, inner: Provider, false_positive_rate: float, seed: int = 0, name: str | None = None):
        super().__init__(name or inner.name)
        self.inner = inner
        self.rate = false_positive_rate
        self.seed = seed

    def _invoke(self, req: ModelRequest) -> ModelResponse:
        resp = self.inner.invoke(req)
        if req.task is Task.FILTER_BOOL and resp.bool_value is False:
            if hash_uniform(self.seed, "fp", req.prompt) < self.rate:
                return ModelResponse(text="true", bool_value=True, confidence=resp.confidence, usage=resp.usage)
        return resp


class StubProvider(Provider):
    """Generative stub: deterministic text for every task, ``true`` for filters."""

    def __init__(self, name: str = "stub", output_tokens: int = 8):
        super().__init__(name)
        self.output_tokens = output_tokens

    def _invoke(self, req: ModelRequest) -> ModelResponse:
        if req.task is Task.FILTER_BOOL:
            return ModelResponse(text="true", bool_value=True, confidence=1.0)
        if req.task is Task.CLASSIFY_MULTI:
            return ModelResponse(text=req.labels[0], labels=(req.labels[0],), confidence=1.0)
        return ModelResponse(text=stub_text(req, self.output_tokens))
