"""Select the compiled core when available, else the pure-Python one.

Set ``LAMP_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import importlib
import os

from . import _pycore


def load(name: str | None = None):
    """Return the core module for ``name`` ("cython", "python" or None for auto)."""
    if name == "python":
        return _pycore
    try:
        return importlib.import_module("lamp._core")
    except ImportError:
        if name == "cython":
            raise
        return _pycore


core = load(os.environ.get("LAMP_BACKEND") or None)
BACKEND = core.BACKEND
