"""Kernel backend selection: compiled extension if available, numpy otherwise.

Set ``QKDRATE_PURE_PYTHON=1`` to force the numpy fallback (useful for
benchmarking and for debugging the extension).
"""

from __future__ import annotations

import os

if os.environ.get("QKDRATE_PURE_PYTHON"):
    from . import kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import kernels_py as _impl

BACKEND = _impl.BACKEND
eigh = _impl.eigh
entropy_bits = _impl.entropy_bits
logdet_chol = _impl.logdet_chol
pinched_relative_terms = _impl.pinched_relative_terms


def backend_name() -> str:
    """Name of the active kernel backend ('cython' or 'python')."""
    return BACKEND
