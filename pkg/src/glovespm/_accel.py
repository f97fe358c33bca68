"""Optional numba acceleration.

Set ``GLOVESPM_DISABLE_NUMBA=1`` to force the pure-numpy kernels, e.g. when
profiling or on platforms without an LLVM build of numba.
"""
import os

_DISABLED = os.environ.get("GLOVESPM_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    import numba

    USE_NUMBA = True
except ImportError:
    numba = None
    USE_NUMBA = False


def njit(func):
    """Compile ``func`` with numba when available, otherwise return it untouched."""
    if numba is None:
        return func
    return numba.njit(cache=False, nogil=True)(func)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
