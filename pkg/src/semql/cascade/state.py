from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum


class Source(str, Enum):
    PROXY_ACCEPT = "ProxyAccept"
    PROXY_REJECT = "ProxyReject"
    ORACLE = "Oracle"
    PROXY_FALLBACK = "ProxyFallback"


@dataclass(frozen=True)
class CascadeConfig:
    oracle_budget: int
    phase2_fraction: float = 0.5
    target_precision: float | None = None
    target_recall: float | None = None
    delta: float = 0.05
    min_sample: int = 20
    seed: int = 0
    batch_rows: int = 4096
    bound: str = "bernstein"
    fixed_thresholds: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.oracle_budget < 0:
            raise ValueError("oracle_budget must be non-negative")
        if not 0.0 < self.phase2_fraction <= 1.0:
            raise ValueError("phase2_fraction must lie in (0, 1]")
        for t in (self.target_precision, self.target_recall):
            if t is not None and not 0.0 < t < 1.0:
                raise ValueError("targets must lie in (0, 1)")
        if self.target_precision is not None and self.target_recall is not None:
            raise ValueError("give a precision target or a recall target, not both")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.batch_rows < 1:
            raise ValueError("batch_rows must be positive")

    @property
    def quality(self) -> float:
        """Required lower-bounded precision above and NPV below the region."""
        return self.target_precision or self.target_recall or 0.9


@dataclass(frozen=True, order=True)
class Sample:
    row_id: tuple
    score: float
    label: bool
    weight: float


@dataclass(frozen=True)
class Scored:
    row_id: tuple
    score: float
    proxy_decision: bool
    errored: bool = False

    @property
    def uncertainty(self) -> float:
        return abs(self.score - 0.5)


@dataclass(frozen=True)
class RoutedPrediction:
    row_id: tuple
    decision: bool
    source: Source


@dataclass
class CascadeState:
    config: CascadeConfig
    tau_low: float = 0.0
    tau_high: float = 1.0
    samples: list[Sample] = field(default_factory=list)
    oracle_calls_used: int = 0
    batch_index: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau_low <= self.tau_high <= 1.0:
            raise ValueError(f"thresholds out of order: {self.tau_low}, {self.tau_high}")

    @property
    def budget_left(self) -> int:
        return self.config.oracle_budget - self.oracle_calls_used

    def in_region(self, score: float) -> bool:
        return self.tau_low <= score <= self.tau_high

    def copy(self) -> "CascadeState":
        return replace(self, samples=list(self.samples))
