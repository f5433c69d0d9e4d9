"""Numba backend selection.

The hot kernels in :mod:`icsadv.kernels` exist twice: a numba ``@njit``
version and a vectorized pure-numpy version. Which one the package binds
at import time is controlled by the ``ICSADV_NUMBA`` environment variable:

* ``auto`` (default) - use numba when it imports, numpy otherwise
* ``1`` / ``on`` / ``true`` / ``numba``  - require numba, raise if missing
* ``0`` / ``off`` / ``false`` / ``numpy`` - force the numpy fallback

Both variants stay importable regardless of the flag so tests and the
benchmark harness can compare them directly.
"""
from __future__ import annotations

import os

_TRUE = ("1", "on", "true", "numba")
_FALSE = ("0", "off", "false", "numpy")


def _numba_importable() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def resolve_backend(flag: str | None = None) -> str:
    """Return "numba" or "numpy" for the given (or environment) flag."""
    if flag is None:
        flag = os.environ.get("ICSADV_NUMBA", "auto")
    flag = flag.strip().lower()
    if flag in _TRUE:
        if not _numba_importable():
            raise RuntimeError(
                "ICSADV_NUMBA=%s requires numba but it is not importable" % flag
            )
        return "numba"
    if flag in _FALSE:
        return "numpy"
    if flag != "auto":
        raise RuntimeError("unrecognized ICSADV_NUMBA value: %r" % flag)
    return "numba" if _numba_importable() else "numpy"


BACKEND = resolve_backend()
NUMBA_ENABLED = BACKEND == "numba"
