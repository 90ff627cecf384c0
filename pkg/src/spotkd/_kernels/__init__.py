"""Recurrent scan kernels with backend selection at import time.

The compiled extension is used when it built successfully; otherwise the
NumPy fallback takes over. Set ``SPOTKD_PURE_PYTHON=1`` to force the
fallback (useful for benchmarking and debugging). ``BACKEND`` records the
active choice.
"""

import os

from spotkd._kernels import numpy_backend

if os.environ.get("SPOTKD_PURE_PYTHON") == "1":
    _impl = numpy_backend
    BACKEND = "numpy"
else:
    try:
        from spotkd._kernels import _scan as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = numpy_backend
        BACKEND = "numpy"

scan_forward = _impl.scan_forward
scan_backward = _impl.scan_backward

__all__ = ["scan_forward", "scan_backward", "BACKEND", "numpy_backend"]
