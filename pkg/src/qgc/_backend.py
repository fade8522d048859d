"""Selection of the propagation kernels.

The compiled extension is used when it imports; setting the environment
variable ``QGC_PURE_PYTHON=1`` forces the NumPy fallback.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_py

try:
    if os.environ.get("QGC_PURE_PYTHON", "0") == "1":
        raise ImportError("pure-Python kernels requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

NAME = "cython" if _compiled is not None else "python"


def get_backend(name: str | None = None) -> ModuleType:
    """Kernel module by name: ``"cython"``, ``"python"`` or ``None`` for the default."""
    if name is None:
        return _compiled or _kernels_py
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available() -> tuple[str, ...]:
    return ("cython", "python") if _compiled is not None else ("python",)
