"""Kernel backend selection.

Prefers the compiled extension (probeq._kernels) and falls back to the numpy
implementation when it is missing.  PROBEQ_BACKEND=py or =c forces a choice;
forcing c without the extension built is an import error.
"""
import os

_forced = os.environ.get("PROBEQ_BACKEND", "").strip().lower()

if _forced == "py":
    from . import _kernels_py as _impl
elif _forced == "c":
    from . import _kernels as _impl  # type: ignore[attr-defined]
elif _forced == "":
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl
else:
    raise ImportError(f"PROBEQ_BACKEND={_forced!r}: expected 'py' or 'c'")

prop2_fill = _impl.prop2_fill
prop2_zmom = _impl.prop2_zmom


def backend_name() -> str:
    """'c' when the compiled kernels are active, 'py' otherwise."""
    return _impl.BACKEND
