"""Kernel backend selection.

The compiled extension is used when it imports; ``ATOMSTRESS_PURE=1`` forces
the numpy fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

kernels = _pykernels
if os.environ.get("ATOMSTRESS_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        kernels = _compiled

BACKEND = kernels.NAME


def use(name: str) -> None:
    """Switch backend at runtime (``"compiled"`` or ``"python"``); used by tests and benchmarks."""
    global kernels, BACKEND
    if name == "python":
        kernels = _pykernels
    elif name == "compiled":
        from . import _kernels

        kernels = _kernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = kernels.NAME
