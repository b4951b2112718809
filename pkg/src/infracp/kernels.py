"""Hot-loop kernels, compiled when available.

``BACKEND`` reports which implementation was selected at import time. Set
``INFRACP_NO_EXT=1`` to force the numpy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py
from ._kernels_py import GROUND_HIT, NO_HIT

_impl = _kernels_py
BACKEND = "python"
if os.environ.get("INFRACP_NO_EXT") != "1":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass

cast_rays = _impl.cast_rays
iou_matrix = _impl.iou_matrix

__all__ = ["BACKEND", "GROUND_HIT", "NO_HIT", "cast_rays", "iou_matrix"]
