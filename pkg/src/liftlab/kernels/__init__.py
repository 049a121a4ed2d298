"""Kernel backend selection.

The compiled extension is preferred when importable; set LIFTLAB_KERNELS=pure
to force the numpy fallback (useful for benchmarking and debugging).  Both
backends implement identical contracts, including tie-breaking.
"""

from __future__ import annotations

import os

from . import pure

if os.environ.get("LIFTLAB_KERNELS", "").strip().lower() == "pure":
    _impl = pure
    BACKEND = "pure"
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = pure
        BACKEND = "pure"

pack_keys = _impl.pack_keys
group_weights = _impl.group_weights
group_max_weight = _impl.group_max_weight
gn_codes = _impl.gn_codes
disc_scan = _impl.disc_scan
heavy_scan = _impl.heavy_scan

__all__ = [
    "BACKEND",
    "pack_keys",
    "group_weights",
    "group_max_weight",
    "gn_codes",
    "disc_scan",
    "heavy_scan",
]
