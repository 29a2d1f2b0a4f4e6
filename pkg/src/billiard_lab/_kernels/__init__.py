"""Kernel backend selection.

The compiled Cython core is used when importable; otherwise the vectorised
numpy fallback.  Set BILLIARD_LAB_BACKEND=numpy (or =cython) to force one.
"""

from __future__ import annotations

import os

from . import _numpy_backend
from .tables import (  # noqa: F401  (re-exported for convenience)
    CurveTable,
    EllipseProfile,
    FourierPerturbedProfile,
    PolarProfile,
    SuperellipseProfile,
    build_table,
)

_FORCED = os.environ.get("BILLIARD_LAB_BACKEND", "").strip().lower()

_backend = None
if _FORCED in ("", "cython", "c"):
    try:
        from . import _core as _cython_backend

        _backend = _cython_backend
    except ImportError:
        if _FORCED:
            raise
        _backend = None
if _backend is None or _FORCED in ("numpy", "python"):
    if _FORCED in ("numpy", "python") or _backend is None:
        _backend = _numpy_backend


def active_backend():
    return _backend


def backend_name() -> str:
    return _backend.NAME


def available_backends():
    out = {"numpy": _numpy_backend}
    try:
        from . import _core

        out["cython"] = _core
    except ImportError:
        pass
    return out
