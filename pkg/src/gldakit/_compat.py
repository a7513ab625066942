"""Numba acceleration shim.

Hot kernels are decorated with ``@njit``. Setting the environment variable
``GLDAKIT_NUMBA=0`` (or running without numba installed) selects the pure
numpy/python fallback path instead; results are identical, only slower.
"""

import os

NUMBA_ENABLED = os.environ.get("GLDAKIT_NUMBA", "1") != "0"

if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


__all__ = ["njit", "NUMBA_ENABLED"]
