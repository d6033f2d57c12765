"""Numba switch.

Hot kernels are written once as plain Python loops and wrapped with
:func:`maybe_njit`.  When numba is importable and ``CTRLCURV_NUMBA`` is not
set to ``0``, they are compiled; otherwise callers use the numpy code paths.
"""

import os

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False


def numba_enabled():
    flag = os.environ.get("CTRLCURV_NUMBA", "1").strip().lower()
    return _HAVE_NUMBA and flag not in ("0", "false", "no", "off")


def maybe_njit(*args, **kwargs):
    """``numba.njit`` when available, identity otherwise."""
    if not _HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
