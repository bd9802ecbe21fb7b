"""Optional numba acceleration.

Kernels are written once as plain Python/numpy loops and compiled with
``numba.njit`` when numba is importable and ``SBNAV_USE_NUMBA`` is not set
to ``0``.  Every accelerated kernel also has a vectorised numpy twin in
:mod:`sbnav.kernels`; the public functions dispatch on :data:`USE_NUMBA`.
"""

import os

_FLAG = os.environ.get("SBNAV_USE_NUMBA", "1").strip().lower()

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("0", "false", "no", "off")


def njit(*args, **kwargs):
    """``numba.njit`` with on-disk caching, or a no-op when numba is off."""
    kwargs.setdefault("cache", True)
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)
