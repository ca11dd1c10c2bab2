"""Optional numba acceleration.

The time-stepping loop and the PDE right-hand sides are written as plain
numerical functions; when numba is importable they are JIT-compiled,
otherwise they run as ordinary Python (slow but identical results).
"""

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap
