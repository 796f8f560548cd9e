"""Kernel dispatch: compiled Cython kernels when built, numpy fallback otherwise.

Set ``RISKHTE_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("RISKHTE_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"

loess_local_linear = _impl.loess_local_linear
count_less_equal = _impl.count_less_equal
