"""Kernel backend selection.

The compiled extension is preferred when importable; set
``SHELLKOOP_BACKEND=python`` to force the NumPy fallback or
``SHELLKOOP_BACKEND=compiled`` to fail loudly if the extension is
missing. Both backends expose the same function set and agree to
floating-point noise; the test suite runs the kernel contracts against
every available backend.
"""

from __future__ import annotations

import os
import warnings

from . import _numpy_kernels

_requested = os.environ.get("SHELLKOOP_BACKEND", "auto").lower()
if _requested not in ("auto", "compiled", "python"):
    raise RuntimeError(
        f"SHELLKOOP_BACKEND must be auto|compiled|python, got {_requested!r}"
    )

_compiled = None
if _requested in ("auto", "compiled"):
    try:
        from . import _ckernels as _compiled  # type: ignore[attr-defined]
    except ImportError as exc:
        if _requested == "compiled":
            raise RuntimeError(f"compiled kernel backend unavailable: {exc}") from exc
        warnings.warn(
            f"compiled kernels unavailable ({exc}); using NumPy fallback",
            RuntimeWarning,
            stacklevel=2,
        )

if _requested == "python" or _compiled is None:
    ops = _numpy_kernels
else:
    ops = _compiled

BACKEND_NAME: str = ops.NAME


def available_backends() -> dict:
    """Name -> module for every importable backend (used by benchmarks/tests)."""
    found = {"python": _numpy_kernels}
    try:
        from . import _ckernels  # type: ignore[attr-defined]

        found["compiled"] = _ckernels
    except ImportError:
        pass
    return found
