"""Kernel backend selection: compiled extension if present, pure fallback.

``SUBREGLAB_KERNELS=pure`` (or ``fast``) forces a backend; the default is the
compiled one when it imported cleanly.
"""

from __future__ import annotations

import os

from . import _pure


def _load_fast():
    try:
        from . import _fast
    except ImportError:
        return None
    return _fast


_FAST = _load_fast()

_forced = os.environ.get("SUBREGLAB_KERNELS", "").strip().lower()
if _forced == "pure":
    impl = _pure
elif _forced == "fast":
    if _FAST is None:
        raise ImportError("SUBREGLAB_KERNELS=fast but the compiled kernels are unavailable")
    impl = _FAST
else:
    impl = _FAST if _FAST is not None else _pure

BACKEND = impl.NAME

dist_many_points = impl.dist_many_points
dist_packed = impl.dist_packed
max_ratio = impl.max_ratio


def available_backends() -> dict:
    """Importable backend modules keyed by name."""
    out = {"pure": _pure}
    if _FAST is not None:
        out["fast"] = _FAST
    return out
