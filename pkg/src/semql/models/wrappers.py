"""Retry with backoff and a FIFO in-flight cap around any provider."""

from __future__ import annotations

import random
import threading
import time
from collections import deque

from semql.errors import ProviderError
from semql.models.base import ModelRequest, ModelResponse, Provider


class RetryingProvider(Provider):
    """Retries retryable failures up to ``retries`` times.

    The wait before attempt k (k = 1, 2, ...) is ``base * 2**(k-1)`` scaled by
    a jitter factor in [1, 2).
    """

    def __init__(
        self,
        inner: Provider,
        retries: int = 3,
        base_delay: float = 0.1,
        jitter: bool = True,
        sleep=time.sleep,
        seed: int = 0,
        name: str | None = None,
    ):
        super().__init__(name or inner.name)
        self.inner = inner
        self.retries = retries
        self.base_delay = base_delay
        self.jitter = jitter
        self.sleep = sleep
        self._rng = random.Random(seed)
        self._rng_lock = threading.Lock()
        self.retry_count = 0

    def delay(self, attempt: int) -> float:
        d = self.base_delay * 2 ** (attempt - 1)
        if self.jitter:
            with self._rng_lock:
                d *= 1.0 + self._rng.random()
        return d

    def _invoke(self, req: ModelRequest) -> ModelResponse:
        attempt = 0
        while True:
            try:
                return self.inner.invoke(req)
            except ProviderError as exc:
                if not exc.retryable or attempt >= self.retries:
                    raise
                attempt += 1
                with self._rng_lock:
                    self.retry_count += 1
                self.sleep(self.delay(attempt))


class ConcurrencyLimiter(Provider):
    """At most ``cap`` calls in flight; waiters are admitted first come, first served."""

    def __init__(self, inner: Provider, cap: int = 8, name: str | None = None):
        if cap < 1:
            raise ValueError("cap must be at least 1")
        super().__init__(name or inner.name)
        self.inner = inner
        self.cap = cap
        self._lock = threading.Lock()
        self._in_flight = 0
        self._waiters: deque[threading.Event] = deque()
        self.max_observed = 0

    def _acquire(self) -> None:
        with self._lock:
            if self._in_flight < self.cap and not self._waiters:
                self._in_flight += 1
                self.max_observed = max(self.max_observed, self._in_flight)
                return
            ev = threading.Event()
            self._waiters.append(ev)
        ev.wait()

    def _release(self) -> None:
        with self._lock:
            if self._waiters:
                # hand the slot straight to the oldest waiter
                self._waiters.popleft().set()
            else:
                self._in_flight -= 1

    def _invoke(self, req: ModelRequest) -> ModelResponse:
        self._acquire()
        try:
            return self.inner.invoke(req)
        finally:
            self._release()
