"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy fallback
is used.  Setting ``CHISLR_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _kernels_py

try:
    if os.environ.get("CHISLR_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python backend forced by CHISLR_PURE_PYTHON")
    from . import _kernels as kernels
    BACKEND = "cython"
except ImportError:
    kernels = _kernels_py
    BACKEND = "python"

__all__ = ["kernels", "BACKEND", "_kernels_py"]
