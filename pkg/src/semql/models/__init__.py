from semql.models.base import CallableProvider, ModelRequest, ModelResponse, Provider, ProviderStats, Task, request_digest
from semql.models.http import HttpProvider, http_provider
from semql.models.registry import ProviderRegistry, as_registry, load_provider_config
from semql.models.scripted import RecordingProvider, ScriptedProvider
from semql.models.synthetic import (
    ORACLE,
    AccuracyProfile,
    ConsistentProvider,
    NoisyFilterProvider,
    StubProvider,
    SyntheticBooleanProvider,
    hash_uniform,
)
from semql.models.wrappers import ConcurrencyLimiter, RetryingProvider


def scripted_provider(fixture_path, name=None) -> ScriptedProvider:
    return ScriptedProvider.from_file(fixture_path, name=name)


def synthetic_boolean_provider(ground_truth, accuracy_profile=ORACLE, seed=0, name="synthetic"):
    return SyntheticBooleanProvider(ground_truth, accuracy_profile, seed, name)


__all__ = [
    "ORACLE",
    "AccuracyProfile",
    "CallableProvider",
    "ConcurrencyLimiter",
    "ConsistentProvider",
    "HttpProvider",
    "ModelRequest",
    "ModelResponse",
    "NoisyFilterProvider",
    "Provider",
    "ProviderRegistry",
    "ProviderStats",
    "RecordingProvider",
    "RetryingProvider",
    "ScriptedProvider",
    "StubProvider",
    "SyntheticBooleanProvider",
    "Task",
    "as_registry",
    "hash_uniform",
    "http_provider",
    "load_provider_config",
    "request_digest",
    "scripted_provider",
    "synthetic_boolean_provider",
]
