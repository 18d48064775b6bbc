"""Numba detection and backend selection.

The hot loops (all-pairs plan sweep, per-iteration gain evaluation) exist in
two flavours: a numba ``@njit`` kernel and a vectorised numpy path.  Which one
runs by default is decided by the ``TRUCKPLATOON_BACKEND`` environment
variable (``numba`` or ``numpy``); without numba installed the numpy path is
always used.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is installed in CI
    numba = None
    HAVE_NUMBA = False

BACKENDS = ("numba", "numpy")


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def default_backend():
    name = os.environ.get("TRUCKPLATOON_BACKEND", "numba" if HAVE_NUMBA else "numpy")
    name = name.strip().lower()
    if name not in BACKENDS:
        raise ValueError(f"TRUCKPLATOON_BACKEND must be one of {BACKENDS}, got {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        return "numpy"
    return name


def resolve_backend(backend=None):
    if backend is None:
        return default_backend()
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend
