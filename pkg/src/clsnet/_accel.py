"""Backend selection for the compiled kernels.

The ``CLSNET_BACKEND`` environment variable picks ``numba`` (default when
numba imports cleanly) or ``numpy``.  ``CLSNET_DISABLE_NUMBA=1`` forces the
numpy path as well.
"""
import os
import warnings

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    HAVE_NUMBA = False

    def njit(*args, **kw):
        if len(args) == 1 and callable(args[0]) and not kw:
            return args[0]
        return lambda f: f


BACKENDS = ("numba", "numpy")


def _initial_backend():
    requested = os.environ.get("CLSNET_BACKEND", "").strip().lower()
    if os.environ.get("CLSNET_DISABLE_NUMBA", "") not in ("", "0"):
        requested = "numpy"
    if not requested:
        return "numba" if HAVE_NUMBA else "numpy"
    if requested not in BACKENDS:
        raise ValueError(f"CLSNET_BACKEND must be one of {BACKENDS}, got {requested!r}")
    if requested == "numba" and not HAVE_NUMBA:
        warnings.warn("numba requested but not importable; using numpy kernels")
        return "numpy"
    return requested


_backend = _initial_backend()


def get_backend():
    return _backend


def set_backend(name):
    """Switch the active kernel backend at runtime (used by tests and benchmarks)."""
    global _backend
    if name not in BACKENDS:
        raise ValueError(f"backend must be one of {BACKENDS}, got {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _backend = name
