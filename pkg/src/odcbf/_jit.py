"""Backend switch for the compiled kernels.

Set ``ODCBF_BACKEND=numpy`` to bypass numba entirely; the default is
``numba`` when it imports cleanly.  The switch is read once at import.
"""

import os

_requested = os.environ.get("ODCBF_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"ODCBF_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    if _requested != "numba":
        raise ImportError
    import numba as _nb
    USE_NUMBA = True
except ImportError:
    _nb = None
    USE_NUMBA = False

BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(fn):
    """numba.njit(cache=True) when enabled, identity otherwise."""
    if USE_NUMBA:
        return _nb.njit(cache=True)(fn)
    return fn
