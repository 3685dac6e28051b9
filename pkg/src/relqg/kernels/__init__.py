"""Hot inner loops with a numba backend and a pure-numpy fallback.

The backend is chosen once at import time. Set ``RELQG_KERNELS=numpy`` to
force the fallback; the default is ``numba`` when it imports cleanly.
Both backends are importable directly as ``numpy_backend`` and
``numba_backend`` (the latter is ``None`` without numba) for benchmarks and
cross-checks.
"""

import logging
import os

from . import _numpy as numpy_backend

logger = logging.getLogger(__name__)

try:
    from . import _numba as numba_backend
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_backend = None

_requested = os.environ.get("RELQG_KERNELS", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(f"RELQG_KERNELS must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numba" and numba_backend is not None:
    BACKEND = "numba"
    _active = numba_backend
else:
    if _requested == "numba":
        logger.warning("numba unavailable; using numpy kernels")
    BACKEND = "numpy"
    _active = numpy_backend

lstm_forward = _active.lstm_forward
lstm_backward = _active.lstm_backward
scatter_add_columns = _active.scatter_add_columns
lcs_length = _active.lcs_length

__all__ = [
    "BACKEND",
    "lcs_length",
    "lstm_backward",
    "lstm_forward",
    "numba_backend",
    "numpy_backend",
    "scatter_add_columns",
]
