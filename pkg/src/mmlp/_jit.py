"""Backend selection for the compiled kernels.

Set ``MMLP_DISABLE_NUMBA=1`` to force the pure-numpy code paths. The flag is
read once at import time.
"""
import os

_FLAG = os.environ.get("MMLP_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and _FLAG not in {"1", "true", "yes", "on"}


def njit(*args, **kwargs):
    """``numba.njit`` when the compiled backend is active, identity otherwise."""
    if not USE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    return numba.njit(*args, **kwargs)


def backend():
    return "numba" if USE_NUMBA else "numpy"
