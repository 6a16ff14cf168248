"""Numba switch.

Kernels are compiled with numba when it is importable, unless the
environment variable ``OFDMA_CAC_DISABLE_NUMBA`` is set to a truthy value,
in which case the pure numpy/Python implementations are used.
"""

import os

_FLAG = "OFDMA_CAC_DISABLE_NUMBA"

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep in CI
    numba = None
    HAVE_NUMBA = False


def _disabled_by_env():
    return os.environ.get(_FLAG, "").strip().lower() not in ("", "0", "false", "no")


USE_NUMBA = HAVE_NUMBA and not _disabled_by_env()

numba_default = {
    "nopython": True,
    "nogil": True,
    "cache": True,
    "fastmath": False,
    "boundscheck": False,
    "error_model": "numpy",
}


def njit(func):
    """Compile ``func`` with the package defaults, or return None without numba."""
    if not HAVE_NUMBA:
        return None
    return numba.jit(**numba_default)(func)


def resolve_backend(backend=None):
    """Map ``None``/"numba"/"numpy" to the backend that will actually run."""
    if backend is None:
        return "numba" if USE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend
