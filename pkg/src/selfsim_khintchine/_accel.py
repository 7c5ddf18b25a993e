"""Optional numba acceleration.

Hot kernels are written in the numba-compatible subset of Python and
decorated with :func:`jit`.  When numba is missing, or when the environment
variable ``SELFSIM_NO_NUMBA`` is set to a true value, the decorator is the
identity and the same code runs as plain Python on numpy arrays.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional dependency
    numba = None

DISABLE_ENV = "SELFSIM_NO_NUMBA"

HAS_NUMBA = numba is not None
USE_NUMBA = HAS_NUMBA and os.environ.get(DISABLE_ENV, "").strip().lower() not in (
    "1",
    "true",
    "yes",
    "on",
)

__all__ = ["jit", "HAS_NUMBA", "USE_NUMBA", "DISABLE_ENV", "python_impl"]


def jit(f=None, **options):
    """``numba.njit`` when acceleration is enabled, otherwise the identity."""
    options.setdefault("cache", True)
    options.setdefault("nogil", True)
    if not USE_NUMBA:
        if f is None:
            return lambda g: g
        return f
    if f is None:
        return lambda g: numba.njit(g, **options)
    return numba.njit(f, **options)


def python_impl(kernel):
    """The undecorated Python function behind a kernel."""
    return getattr(kernel, "py_func", kernel)
