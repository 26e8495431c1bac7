"""Numba switch.

Setting ``SWM_DISABLE_NUMBA=1`` (or having numba unavailable) routes every
hot kernel to its pure-numpy twin.  The flag is read once at import time;
:func:`set_backend` flips it at runtime for tests and benchmarks.
"""
import functools
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLED = os.environ.get("SWM_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

HAVE_NUMBA = numba is not None
_use_numba = HAVE_NUMBA and not _DISABLED


def njit(func):
    """``numba.njit(cache=True)`` when numba is importable, else identity."""
    if numba is None:
        return func
    return numba.njit(cache=True)(func)


def use_numba() -> bool:
    return _use_numba


def set_backend(name: str) -> None:
    """Select ``"numba"`` or ``"numpy"`` kernels for subsequent calls."""
    global _use_numba
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not installed")
        _use_numba = True
    elif name == "numpy":
        _use_numba = False
    else:
        raise ValueError(f"unknown backend {name!r}")


def dispatch(numba_impl, numpy_impl):
    """Build a wrapper that picks the kernel matching the current backend."""

    @functools.wraps(numpy_impl)
    def wrapper(*args):
        if _use_numba:
            return numba_impl(*args)
        return numpy_impl(*args)

    return wrapper
