"""Backend switch for the compiled kernels.

The numba path is used by default. Set ``EVACUSCOPE_NUMBA=0`` (or numba's own
``NUMBA_DISABLE_JIT=1``) to run the pure-numpy path instead; it is also
selected automatically when numba cannot be imported.
"""
from __future__ import annotations

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_FALSY = {"0", "false", "no", "off"}


def _numba_requested() -> bool:
    if os.environ.get("EVACUSCOPE_NUMBA", "1").strip().lower() in _FALSY:
        return False
    return os.environ.get("NUMBA_DISABLE_JIT", "0").strip() in {"", "0"}


HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and _numba_requested()


def njit(func=None, **kwargs):
    """``numba.njit(cache=True, nogil=True)`` when numba is importable, else identity."""
    if numba is None:
        if func is None:
            return lambda f: f
        return func
    opts = {"cache": True, "nogil": True}
    opts.update(kwargs)
    if func is None:
        return numba.njit(**opts)
    return numba.njit(**opts)(func)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
