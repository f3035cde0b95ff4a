"""Provider-independent token accounting: one token per four UTF-8 bytes, rounded up."""

from __future__ import annotations


def estimate_tokens(text: str) -> int:
    return -(-len(text.encode("utf-8")) // 4)


def truncate_to_tokens(text: str, max_tokens: int) -> str:
    """Cut ``text`` so that ``estimate_tokens`` of the result is at most ``max_tokens``."""
    data = text.encode("utf-8")
    limit = max_tokens * 4
    if len(data) <= limit:
        return text
    return data[:limit].decode("utf-8", errors="ignore")
