"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
pure-Python ``_pykernels`` twin. Set ``LAZYMDP_PURE_PYTHON=1`` to force the
fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels

try:
    if os.environ.get("LAZYMDP_PURE_PYTHON") == "1":
        raise ImportError("pure-Python kernels forced")
    from . import _ckernels
except ImportError:
    _ckernels = None

BACKEND = "cython" if _ckernels is not None else "python"


def available_backends() -> list[str]:
    return ["cython", "python"] if _ckernels is not None else ["python"]


def get_backend(name: str | None = None) -> ModuleType:
    """Kernel module for ``name`` ("cython", "python" or None for the default)."""
    name = name or BACKEND
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
