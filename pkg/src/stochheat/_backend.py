"""Selects the kernel implementation at import time.

The compiled extension is used when importable; setting
``STOCHHEAT_BACKEND=python`` forces the pure-Python fallback.
"""
import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

AVAILABLE = {"python": _fallback}
if _compiled is not None:
    AVAILABLE["compiled"] = _compiled


def get(name=None):
    """Kernel module by name; ``None`` means the import-time default."""
    if name is None:
        return kernels
    try:
        return AVAILABLE[name]
    except KeyError:
        raise ValueError(
            f"backend {name!r} unavailable; have {sorted(AVAILABLE)}"
        ) from None


_requested = os.environ.get("STOCHHEAT_BACKEND", "").strip().lower()
if _requested == "python" or _compiled is None:
    kernels = _fallback
else:
    kernels = _compiled

NAME = kernels.NAME
