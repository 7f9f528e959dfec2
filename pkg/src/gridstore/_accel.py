"""JIT switch for the numeric kernels.

Set ``GRIDSTORE_NUMBA=0`` before import to force the pure-numpy code path.
When numba is missing the numpy path is used as well.
"""
import os

_flag = os.environ.get("GRIDSTORE_NUMBA", "1").strip().lower()
_requested = _flag not in ("0", "false", "no", "off")

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _requested


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when available, else a no-op decorator."""
    if HAVE_NUMBA:
        import numba

        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    def wrap(fn):
        return fn

    if args and callable(args[0]):
        return args[0]
    return wrap
