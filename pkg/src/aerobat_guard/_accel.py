"""Numba switch for the hot kernels.

Kernels are written once in a numba-compatible numpy subset. With numba
available and ``AEROBAT_NUMBA`` unset (or truthy) they are compiled with
``njit``; with ``AEROBAT_NUMBA=0`` the same source runs as plain numpy.
"""
import os

_FLAG = os.environ.get("AEROBAT_NUMBA", "1").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and _FLAG not in ("0", "false", "no", "off")


def kernel(fn):
    """Compile ``fn`` with numba when enabled, otherwise return it unchanged."""
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
