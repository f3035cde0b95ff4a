"""Kernel selection: compiled extension when built, pure Python otherwise.

Set ``SEMQL_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from semql import _kernels_py

if os.environ.get("SEMQL_PURE_PYTHON") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from semql import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

eb_radius = _impl.eb_radius
bound_scan = _impl.bound_scan
inclusion_probabilities = _impl.inclusion_probabilities
order_sample = _impl.order_sample

__all__ = ["BACKEND", "bound_scan", "eb_radius", "inclusion_probabilities", "order_sample"]
