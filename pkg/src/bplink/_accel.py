"""Numba switch.

Set ``BPLINK_DISABLE_NUMBA=1`` to force the pure-numpy kernels. Numba's own
``NUMBA_DISABLE_JIT`` is honoured as well.
"""

from __future__ import annotations

import os

_FALSY = {"", "0", "false", "no", "off"}


def _flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() not in _FALSY


try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _flag("BPLINK_DISABLE_NUMBA") and not _flag("NUMBA_DISABLE_JIT")


def njit(func):
    """``numba.njit(cache=True, nogil=True)`` when numba is present, identity otherwise."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
