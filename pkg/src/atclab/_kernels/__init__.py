"""Kernel backend selection.

The compiled extension is preferred when present; set ATCLAB_PURE=1 to
force the pure-Python implementations. Either way the module exposes
the same two functions with identical semantics.
"""

import os

from .pure import DEL, INS, MATCH, SUB
from . import pure

if os.environ.get("ATCLAB_PURE"):
    _impl = pure
    BACKEND = "pure"
else:
    try:
        from . import _speedups as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = pure
        BACKEND = "pure"

align_ops = _impl.align_ops
upsample2 = _impl.upsample2

__all__ = ["align_ops", "upsample2", "BACKEND", "MATCH", "SUB", "DEL", "INS", "pure"]
