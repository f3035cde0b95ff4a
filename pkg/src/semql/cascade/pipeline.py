"""Proxy scoring, importance sampling, threshold learning and routing."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from semql import kernels
from semql.cascade.bounds import threshold_bounds
from semql.cascade.state import (
    CascadeConfig,
    CascadeState,
    RoutedPrediction,
    Sample,
    Scored,
    Source,
)
from semql.errors import ConfigMismatch, ProviderError
from semql.models.synthetic import hash_uniform

UNIFORM_SHARE = 0.2

# oracle(row_id) -> bool; raises ProviderError on failure
OracleFn = Callable[[tuple], bool]


class DegenerateSampleWarning(UserWarning):
    """Every oracle label in the sample is identical."""


def score_of(answer: bool, confidence: float | None) -> float:
    c = 1.0 if confidence is None else confidence
    return c if answer else 1.0 - c


def phase1_proxy(rows: Iterable[tuple[tuple, str]], proxy_fn) -> list[Scored]:
    """One proxy call per row. ``proxy_fn(row_id, prompt) -> (bool, confidence)``."""
    out = []
    for row_id, prompt in rows:
        try:
            answer, conf = proxy_fn(row_id, prompt)
        except ProviderError:
            out.append(Scored(row_id, 0.5, False, errored=True))
            continue
        out.append(Scored(row_id, score_of(answer, conf), bool(answer)))
    return out


def mixture_probabilities(scores: Sequence[float]) -> list[float]:
    """``0.2 / N + 0.8 * tri(s) / sum(tri)`` with ``tri(s) = 1 - 2|s - 0.5|``."""
    n = len(scores)
    if n == 0:
        return []
    tri = [max(0.0, 1.0 - 2.0 * abs(s - 0.5)) for s in scores]
    total = sum(tri)
    if total <= 0.0:
        return [1.0 / n] * n
    return [UNIFORM_SHARE / n + (1.0 - UNIFORM_SHARE) * t / total for t in tri]


def select_sample(scored: Sequence[Scored], k: int, seed: int) -> list[tuple[Scored, float]]:
    """Order-sample ``k`` rows without replacement; returns (row, inclusion probability).

    Keys depend only on the seed and row id, so the same rows are chosen no
    matter how the input was partitioned before being concatenated.
    """
    k = min(k, len(scored))
    if k <= 0:
        return []
    q = mixture_probabilities([r.score for r in scored])
    lam = kernels.inclusion_probabilities(q, k)
    u = [hash_uniform(seed, "sample", r.row_id) for r in scored]
    picked = kernels.order_sample(u, lam, k)
    return [(scored[i], lam[i]) for i in sorted(picked)]


@dataclass
class CascadeCounters:
    proxy_errors: int = 0
    oracle_errors: int = 0
    degenerate: int = 0


def phase2_sample(
    scored: Sequence[Scored],
    budget_slice: int,
    seed: int,
    oracle: OracleFn,
    counters: CascadeCounters | None = None,
) -> tuple[list[Sample], int]:
    """Label a weighted sample with the oracle. Returns (samples, oracle calls spent)."""
    counters = counters or CascadeCounters()
    samples = []
    spent = 0
    for row, pi in select_sample(scored, budget_slice, seed):
        spent += 1
        try:
            label = oracle(row.row_id)
        except ProviderError:
            counters.oracle_errors += 1
            continue
        samples.append(Sample(row.row_id, row.score, bool(label), 1.0 / pi))
    return samples, spent


def phase3_learn_thresholds(samples: Sequence[Sample], config: CascadeConfig) -> tuple[float, float]:
    if config.fixed_thresholds is not None:
        return config.fixed_thresholds
    if len(samples) < config.min_sample:
        return 0.0, 1.0
    ordered = sorted(samples, key=lambda s: (s.score, s.row_id))
    scores = [s.score for s in ordered]
    labels = [1.0 if s.label else 0.0 for s in ordered]
    if all(labels):
        warnings.warn("all sampled rows are positive", DegenerateSampleWarning, stacklevel=2)
        return 0.0, scores[0]
    if not any(labels):
        warnings.warn("all sampled rows are negative", DegenerateSampleWarning, stacklevel=2)
        return scores[-1], 1.0
    weights = [s.weight for s in ordered]
    lb_pos, lb_neg = threshold_bounds(scores, labels, weights, config.delta / 2.0, config.bound)
    target = config.quality
    tau_high = next((scores[i] for i in range(len(scores)) if lb_pos[i] >= target), 1.0)
    tau_low = next((scores[i] for i in reversed(range(len(scores))) if lb_neg[i] >= target), 0.0)
    if tau_low > tau_high:
        # rows between the two are claimed by both bounds; keep them uncertain
        tau_low, tau_high = tau_high, tau_low
    return tau_low, tau_high


def _recompute(state: CascadeState) -> CascadeState:
    state.samples.sort()
    state.tau_low, state.tau_high = phase3_learn_thresholds(state.samples, state.config)
    return state


def batch_allowance(remaining_budget: int, batch_rows: int, rows_remaining: int) -> int:
    """Share of the remaining budget for a batch, proportional to its size."""
    if rows_remaining <= 0 or remaining_budget <= 0:
        return 0
    if batch_rows >= rows_remaining:
        return remaining_budget
    return min(remaining_budget, math.floor(remaining_budget * batch_rows / rows_remaining))


def phase4_refine(
    state: CascadeState,
    batch: Sequence[Scored],
    allowance: int,
    oracle: OracleFn,
    counters: CascadeCounters | None = None,
) -> tuple[CascadeState, dict]:
    """Sample the batch's uncertainty region, then relearn thresholds.

    Returns the updated state and the oracle labels obtained for this batch.
    """
    allowance = min(allowance, state.budget_left)
    region = [r for r in batch if state.in_region(r.score)]
    if not region or allowance <= 0:
        return state, {}
    k = round(allowance * state.config.phase2_fraction)
    seed = state.config.seed * 1_000_003 + state.batch_index
    new, spent = phase2_sample(region, k, seed, oracle, counters)
    state.samples.extend(new)
    state.oracle_calls_used += spent
    _recompute(state)
    return state, {s.row_id: s.label for s in new}


def route(
    batch: Sequence[Scored],
    state: CascadeState,
    oracle: OracleFn,
    allowance: int,
    known: dict | None = None,
    counters: CascadeCounters | None = None,
) -> list[RoutedPrediction]:
    """Final decision for every row of a batch.

    Rows inside the region are sent to the oracle most-uncertain first while
    the batch allowance lasts; rows already labelled while sampling reuse
    that label.
    """
    counters = counters or CascadeCounters()
    known = known or {}
    decided: dict[tuple, RoutedPrediction] = {}
    pending = []
    for r in batch:
        if r.score < state.tau_low:
            decided[r.row_id] = RoutedPrediction(r.row_id, False, Source.PROXY_REJECT)
        elif r.score > state.tau_high:
            decided[r.row_id] = RoutedPrediction(r.row_id, True, Source.PROXY_ACCEPT)
        elif r.row_id in known:
            decided[r.row_id] = RoutedPrediction(r.row_id, known[r.row_id], Source.ORACLE)
        else:
            pending.append(r)
    pending.sort(key=lambda r: (r.uncertainty, r.row_id))
    left = min(allowance, state.budget_left)
    for r in pending:
        if left > 0:
            left -= 1
            state.oracle_calls_used += 1
            try:
                decided[r.row_id] = RoutedPrediction(r.row_id, bool(oracle(r.row_id)), Source.ORACLE)
                continue
            except ProviderError:
                counters.oracle_errors += 1
        decided[r.row_id] = RoutedPrediction(r.row_id, r.proxy_decision, Source.PROXY_FALLBACK)
    return [decided[r.row_id] for r in batch]


@dataclass
class CascadeResult:
    predictions: list[RoutedPrediction]
    state: CascadeState
    proxy_calls: int
    counters: CascadeCounters = field(default_factory=CascadeCounters)

    @property
    def oracle_calls(self) -> int:
        return self.state.oracle_calls_used

    def by_source(self) -> dict[str, int]:
        out = {s.value: 0 for s in Source}
        for p in self.predictions:
            out[p.source.value] += 1
        return out

    def decisions(self) -> dict[tuple, bool]:
        return {p.row_id: p.decision for p in self.predictions}


def run_cascade(scored: Sequence[Scored], oracle: OracleFn, config: CascadeConfig, proxy_calls: int | None = None) -> CascadeResult:
    """Phases 2 to 4 plus routing over proxy-scored rows, batch by batch.

    ``scored`` should be in a canonical order (by row id) for the result to
    be independent of how Phase 1 was partitioned.
    """
    state = CascadeState(config)
    if config.fixed_thresholds is not None:
        state.tau_low, state.tau_high = config.fixed_thresholds
    counters = CascadeCounters(proxy_errors=sum(1 for r in scored if r.errored))
    predictions: list[RoutedPrediction] = []
    total = len(scored)
    done = 0
    for start in range(0, total, config.batch_rows):
        batch = scored[start : start + config.batch_rows]
        allowance = batch_allowance(state.budget_left, len(batch), total - done)
        before = state.oracle_calls_used
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DegenerateSampleWarning)
            state, known = phase4_refine(state, batch, allowance, oracle, counters)
        counters.degenerate += sum(1 for w in caught if issubclass(w.category, DegenerateSampleWarning))
        left = allowance - (state.oracle_calls_used - before)
        predictions.extend(route(batch, state, oracle, left, known, counters))
        state.batch_index += 1
        done += len(batch)
    return CascadeResult(predictions, state, proxy_calls if proxy_calls is not None else total, counters)


def merge_states(a: CascadeState, b: CascadeState) -> CascadeState:
    if a.config != b.config:
        raise ConfigMismatch("cascade states come from different configurations")
    merged = CascadeState(
        a.config,
        samples=sorted(a.samples + b.samples),
        oracle_calls_used=a.oracle_calls_used + b.oracle_calls_used,
        batch_index=max(a.batch_index, b.batch_index),
    )
    return _recompute(merged)


def recompute(state: CascadeState) -> CascadeState:
    return _recompute(state.copy())
