"""Exception hierarchy shared across semql."""

from __future__ import annotations


class SemqlError(Exception):
    """Base class for every error raised by semql."""


class SQLSyntaxError(SemqlError, SyntaxError):
    """Malformed SQL text, with the position and the tokens that would have been accepted."""

    def __init__(self, message: str, line: int, column: int, expected: frozenset[str] = frozenset()):
        self.line = line
        self.column = column
        self.expected = frozenset(expected)
        detail = f"{message} at line {line}, column {column}"
        if self.expected:
            detail += f" (expected one of: {', '.join(sorted(self.expected))})"
        super().__init__(detail)
        self.msg = detail
        self.lineno = line
        self.offset = column


class UnknownNameError(SemqlError, NameError):
    """A table or column reference that does not resolve against the catalog."""


class PlanTypeError(SemqlError, TypeError):
    """A type error detected while lowering or evaluating a query."""


class ArityMismatch(SemqlError, ValueError):
    """Number of values does not match the number of prompt bindings."""


class LabelOverflow(SemqlError, ValueError):
    """A single classification label does not fit the model context window."""


class ProviderError(SemqlError):
    """Inference failure. ``retryable`` tells callers whether another attempt may succeed."""

    def __init__(self, message: str, retryable: bool = False):
        super().__init__(message)
        self.retryable = retryable


class FixtureParseError(SemqlError, ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class OracleUnavailable(SemqlError):
    """The LLM-backed rewrite oracle could not answer."""


class ConfigMismatch(SemqlError, ValueError):
    """Two cascade states built from different configurations were merged."""


class ScenarioParseError(SemqlError, ValueError):
    pass


class QueryAborted(SemqlError):
    """Execution stopped on a provider failure; ``stats`` holds what ran before the failure."""

    def __init__(self, cause: ProviderError, stats):
        super().__init__(f"query aborted: {cause}")
        self.cause = cause
        self.stats = stats
