"""Kernel backend selection.

Hot numeric kernels (convolutions for the denoiser net, the TDLMS raster
scan) exist twice: a numba @njit version and a pure-numpy fallback.  The
active backend is chosen once at import time:

* ``ECHONAV_BACKEND=numpy``  forces the pure-numpy path,
* ``ECHONAV_BACKEND=numba``  forces numba (ImportError if unavailable),
* unset: numba when importable, numpy otherwise.

``benchmarks/backend_bench.py`` compares the two.
"""

import os

_ENV_VAR = "ECHONAV_BACKEND"


def _resolve() -> str:
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        import numba  # noqa: F401  (fail loudly if forced but missing)

        return "numba"
    if choice:
        raise ValueError(f"{_ENV_VAR} must be 'numba' or 'numpy', got {choice!r}")
    try:
        import numba  # noqa: F401
    except ImportError:
        return "numpy"
    return "numba"


ACTIVE = _resolve()


def active_backend() -> str:
    """Name of the kernel backend selected at import time."""
    return ACTIVE
