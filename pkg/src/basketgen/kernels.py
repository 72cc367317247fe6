"""Hot-loop dispatch: compiled Cython kernels when available, numpy otherwise.

Set ``BASKETGEN_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"

if os.environ.get("BASKETGEN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
else:
    _impl = _fallback

sgns_epoch = _impl.sgns_epoch
lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward


def compiled_module():
    """Return the compiled module or ``None`` (used by tests and benchmarks)."""
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels
