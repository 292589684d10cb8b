"""Backend switch for the compiled kernels.

Set ``SHARPSSL_DISABLE_NUMBA=1`` before import to skip compilation entirely;
the kernels then run as plain Python and the projection sweep takes the
vectorised numpy path instead.  ``SHARPSSL_BACKEND=numpy`` keeps numba
importable but routes the sweep through numpy (handy for benchmarking both).
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

NUMBA_DISABLED = numba is None or os.environ.get("SHARPSSL_DISABLE_NUMBA", "0") not in ("", "0")

if not NUMBA_DISABLED and "NUMBA_THREADING_LAYER" not in os.environ:
    # the bundled TBB is often too old and numba warns on every process start
    numba.config.THREADING_LAYER = "omp"


def jit(func=None, *, parallel=False):
    """``numba.njit(cache=True)`` when available, identity otherwise."""

    def wrap(f):
        if NUMBA_DISABLED:
            f.py_func = f
            return f
        return numba.njit(cache=True, parallel=parallel, fastmath=False)(f)

    if func is not None:
        return wrap(func)
    return wrap


if NUMBA_DISABLED:
    prange = range
else:
    prange = numba.prange


def use_numba():
    """Whether the sweep should dispatch to the compiled kernels right now."""
    if NUMBA_DISABLED:
        return False
    return os.environ.get("SHARPSSL_BACKEND", "numba").lower() != "numpy"


def set_threads(n):
    if n is None or NUMBA_DISABLED:
        return
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
