"""Kernel backend selection.

The compiled extension (``nbcs._kernels``) is preferred; the numpy
reference (``nbcs._kernels_py``) is the fallback.  Set ``NBCS_BACKEND`` to
``cython`` or ``python`` to force one; forcing ``cython`` raises if the
extension was not built.
"""
from __future__ import annotations

import os

from . import _kernels_py


def _load():
    choice = os.environ.get("NBCS_BACKEND", "").strip().lower()
    if choice in ("python", "py"):
        return _kernels_py
    try:
        from . import _kernels
    except ImportError:
        if choice in ("cython", "compiled", "c"):
            raise ImportError(
                "NBCS_BACKEND requested the compiled backend but nbcs._kernels "
                "is not built; reinstall the package or unset NBCS_BACKEND"
            )
        return _kernels_py
    return _kernels


kernels = _load()
BACKEND_NAME: str = kernels.NAME


def available_backends():
    """Name -> module for every backend importable in this environment."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    return out
