"""Chat-completion client over JSON/HTTP."""

from __future__ import annotations

import json
import os
import re

import httpx

from semql.errors import ProviderError
from semql.models.base import ModelRequest, ModelResponse, Provider, Task
from semql.models.wrappers import ConcurrencyLimiter, RetryingProvider

BOOL_INSTRUCTION = (
    "\n\nAnswer with exactly `true` or `false`, then a space, then the probability "
    "between 0 and 1 that your answer is correct. Example: `true 0.85`."
)
CLASSIFY_INSTRUCTION = "\n\nCandidate labels: {labels}\nAnswer with a JSON array containing every matching label."
_BOOL_RE = re.compile(r"^\s*(true|false)\s+([01](?:\.\d+)?|\.\d+)\s*$", re.IGNORECASE)


def parse_bool_answer(text: str) -> tuple[bool, float]:
    m = _BOOL_RE.match(text)
    if not m:
        raise ProviderError(f"unparseable boolean answer {text[:40]!r}", retryable=False)
    conf = float(m.group(2))
    if not 0.0 <= conf <= 1.0:
        raise ProviderError(f"probability {conf} outside [0, 1]", retryable=False)
    return m.group(1).lower() == "true", conf


def parse_label_answer(text: str) -> list[str]:
    body = text.strip()
    if body.startswith("```"):
        body = body.strip("`").removeprefix("json").strip()
    try:
        labels = json.loads(body)
    except json.JSONDecodeError:
        raise ProviderError(f"unparseable label answer {text[:40]!r}", retryable=False) from None
    if not isinstance(labels, list) or not all(isinstance(l, str) for l in labels):
        raise ProviderError("label answer must be a JSON array of strings", retryable=False)
    return labels


class HttpProvider(Provider):
    name = "http"

    def __init__(
        self,
        endpoint_url: str,
        api_key_env: str = "SEMQL_API_KEY",
        timeout: float = 60.0,
        client: httpx.Client | None = None,
        name: str | None = None,
    ):
        super().__init__(name)
        self.url = endpoint_url.rstrip("/") + "/v1/chat/completions"
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.client = client or httpx.Client(timeout=timeout)

    def _content(self, req: ModelRequest) -> str:
        if req.task is Task.FILTER_BOOL:
            return req.prompt + BOOL_INSTRUCTION
        if req.task is Task.CLASSIFY_MULTI:
            return req.prompt + CLASSIFY_INSTRUCTION.format(labels=json.dumps(list(req.labels)))
        return req.prompt

    def _invoke(self, req: ModelRequest) -> ModelResponse:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise ProviderError(f"environment variable {self.api_key_env} is not set", retryable=False)
        body = {
            "model": req.model_name,
            "messages": [{"role": "user", "content": self._content(req)}],
            "max_tokens": req.max_output_tokens,
        }
        try:
            r = self.client.post(self.url, json=body, headers={"Authorization": f"Bearer {key}"})
        except httpx.TimeoutException as exc:
            raise ProviderError(f"timeout: {exc}", retryable=True) from exc
        except httpx.TransportError as exc:
            raise ProviderError(f"transport error: {exc}", retryable=True) from exc
        if r.status_code >= 500:
            raise ProviderError(f"HTTP {r.status_code}", retryable=True)
        if r.status_code >= 400:
            raise ProviderError(f"HTTP {r.status_code}: {r.text[:200]}", retryable=False)
        try:
            payload = r.json()
            text = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise ProviderError("malformed chat-completion response", retryable=False) from None
        usage = payload.get("usage") or {}
        usage_pair = (int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0)))
        if req.task is Task.FILTER_BOOL:
            value, conf = parse_bool_answer(text)
            return ModelResponse(text=text, bool_value=value, confidence=conf, usage=usage_pair)
        if req.task is Task.CLASSIFY_MULTI:
            return ModelResponse(text=text, labels=tuple(parse_label_answer(text)), usage=usage_pair)
        return ModelResponse(text=text, usage=usage_pair)


def http_provider(endpoint_url: str, api_key_env: str = "SEMQL_API_KEY", **kwargs) -> Provider:
    """HTTP client wrapped with retries and the default in-flight cap."""
    retry_opts = {k: kwargs.pop(k) for k in ("retries", "base_delay", "sleep", "jitter") if k in kwargs}
    cap = kwargs.pop("cap", 8)
    name = kwargs.pop("name", None)
    inner = HttpProvider(endpoint_url, api_key_env, name=name, **kwargs)
    return RetryingProvider(ConcurrencyLimiter(inner, cap), name=name or inner.name, **retry_opts)
