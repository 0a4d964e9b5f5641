"""Selects the numba or pure-numpy implementation of the hot kernels.

Set ``RDV_DISABLE_NUMBA=1`` before import to force the numpy path. If numba
is not installed the numpy path is used automatically.
"""

import os

_disabled = os.environ.get("RDV_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _disabled:
        raise ImportError("numba disabled by RDV_DISABLE_NUMBA")
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False


def njit_options():
    return dict(cache=True, nogil=True, fastmath=False, error_model="numpy")


def njit(func):
    """``numba.njit`` with the package options, or the identity when disabled."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(**njit_options())(func)


def backend_name():
    return "numba" if HAVE_NUMBA else "numpy"
