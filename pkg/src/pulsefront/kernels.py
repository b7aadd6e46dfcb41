"""Hot kernels, compiled when available.

The Cython build (``_kernels_ext``) is preferred. Set ``PULSEFRONT_PURE_PYTHON=1``
before import to force the numpy versions, e.g. to compare the two.
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("PULSEFRONT_PURE_PYTHON") != "1":
    try:
        from . import _kernels_ext as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

cubic_reaction = _impl.cubic_reaction
cubic_reaction_fuu = _impl.cubic_reaction_fuu
tridiag_factor = _impl.tridiag_factor
tridiag_solve = _impl.tridiag_solve
ray_crossings = _impl.ray_crossings

__all__ = [
    "BACKEND",
    "cubic_reaction",
    "cubic_reaction_fuu",
    "tridiag_factor",
    "tridiag_solve",
    "ray_crossings",
]
