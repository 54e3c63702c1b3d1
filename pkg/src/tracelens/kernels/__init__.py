"""Hot numeric kernels with selectable backends.

The numba backend is used when importable; set TRACELENS_BACKEND=numpy to
force the pure-numpy fallback or TRACELENS_BACKEND=numba to require the
compiled path. Selection happens at import time.
"""

from __future__ import annotations

import os

_requested = os.environ.get("TRACELENS_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"TRACELENS_BACKEND={_requested!r} not recognized; use 'numba' or 'numpy'"
    )

if _requested == "numpy":
    from . import _numpy as _impl

    _backend = "numpy"
else:
    try:
        from . import _numba as _impl  # type: ignore[no-redef]

        _backend = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        from . import _numpy as _impl  # type: ignore[no-redef]

        _backend = "numpy"

nucleus_entropy_batch = _impl.nucleus_entropy_batch
blocked_row_entropies = _impl.blocked_row_entropies
vocab_projection_batch = _impl.vocab_projection_batch


def backend_name() -> str:
    """Name of the kernel backend selected at import time."""
    return _backend


def warmup() -> None:
    """Trigger one tiny call per kernel so JIT cost is paid up front."""
    import numpy as np

    nucleus_entropy_batch(np.array([0.6, 0.4]), np.array([0, 2], dtype=np.int64), 0.95)
    blocked_row_entropies(np.array([[0.5, 0.5]]), np.array([True, True]))
    vocab_projection_batch(
        np.array([[0.5, 0.5]]),
        np.array([True, True]),
        np.array([1, 2], dtype=np.int64),
        np.array([[1]], dtype=np.int64),
    )
