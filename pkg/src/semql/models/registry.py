"""Model-name routing and provider configuration files."""

from __future__ import annotations

import json
import os
from pathlib import Path

from semql.errors import ProviderError
from semql.models.base import Provider, ProviderStats
from semql.models.http import http_provider
from semql.models.scripted import ScriptedProvider
from semql.models.synthetic import AccuracyProfile, SyntheticBooleanProvider

DEFAULT_MODEL = "default"


class ProviderRegistry:
    """Maps model names to providers, with an optional fallback."""

    def __init__(self, providers: dict[str, Provider] | None = None, default: str | None = None):
        self.providers: dict[str, Provider] = dict(providers or {})
        if default is None and len(self.providers) == 1:
            default = next(iter(self.providers))
        self.default = default

    @classmethod
    def single(cls, provider: Provider, name: str | None = None) -> "ProviderRegistry":
        return cls({name or provider.name: provider}, default=name or provider.name)

    def add(self, name: str, provider: Provider, default: bool = False) -> None:
        self.providers[name] = provider
        if default or self.default is None:
            self.default = name

    def resolve(self, model: str | None) -> tuple[str, Provider]:
        """Return (model name to send, provider)."""
        if model is not None and model in self.providers:
            return model, self.providers[model]
        if self.default is None:
            raise ProviderError(f"no provider configured for model {model!r}", retryable=False)
        return (model or self.default), self.providers[self.default]

    def all_stats(self) -> dict[str, ProviderStats]:
        seen: dict[int, str] = {}
        out = {}
        for name, p in self.providers.items():
            if id(p) not in seen:
                seen[id(p)] = name
                out[name] = p.stats
        return out

    def total_calls(self) -> int:
        return sum(s.call_count for s in self.all_stats().values())


def as_registry(providers) -> ProviderRegistry:
    if isinstance(providers, ProviderRegistry):
        return providers
    if isinstance(providers, Provider):
        return ProviderRegistry.single(providers)
    return ProviderRegistry(dict(providers))


def build_provider(entry: dict, base_dir: Path) -> Provider:
    kind = entry.get("kind")
    name = entry.get("name")
    params = entry.get("params", {})
    if not name:
        raise ValueError("provider entry needs a name")
    if kind == "scripted":
        return ScriptedProvider.from_file(base_dir / params["fixture"], name=name)
    if kind == "synthetic":
        truth_path = base_dir / params["ground_truth"]
        with open(truth_path, encoding="utf-8") as fh:
            truth = {k: bool(v) for k, v in json.load(fh).items()}
        profile = AccuracyProfile(**params.get("profile", {"p_correct": 1.0, "kind": "oracle"}))
        return SyntheticBooleanProvider(truth, profile, seed=int(params.get("seed", 0)), name=name)
    if kind == "http":
        return http_provider(params["endpoint"], params.get("api_key_env", "SEMQL_API_KEY"), name=name)
    raise ValueError(f"unknown provider kind {kind!r}")


def load_provider_config(path: str | os.PathLike) -> ProviderRegistry:
    """Read ``[{name, kind, params}, ...]`` or ``{"providers": [...], "default": name}``."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    entries = doc["providers"] if isinstance(doc, dict) else doc
    default = doc.get("default") if isinstance(doc, dict) else None
    reg = ProviderRegistry()
    for entry in entries:
        reg.add(entry["name"], build_provider(entry, path.parent))
    if default is not None:
        if default not in reg.providers:
            raise ValueError(f"default provider {default!r} is not defined")
        reg.default = default
    elif entries:
        reg.default = entries[0]["name"]
    return reg
