"""Kernel selection: the compiled extension when built, else the fallback.

Set ``MERLAB_PURE_PYTHON=1`` to force the fallback.
"""
import os

from merlab import _fallback

_compiled = None
if os.environ.get("MERLAB_PURE_PYTHON") != "1":
    try:
        from merlab import _kernels as _compiled
    except ImportError:
        _compiled = None

_impl = _compiled if _compiled is not None else _fallback

BACKEND = "cython" if _compiled is not None else "python"
seq_weights = _impl.seq_weights
rwm_logistic = _impl.rwm_logistic


def compiled():
    """The compiled kernel module, or None when it is not available."""
    return _compiled
