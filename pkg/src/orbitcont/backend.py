"""Backend selection for the hot numeric kernels.

The integration kernels in :mod:`orbitcont.kernels` exist in two flavours: a
numba ``@njit(nogil=True)`` build (default) and a pure-numpy/Python build.
Set ``MANIFOLD_BACKEND=numpy`` before import to force the fallback path, e.g.
for debugging or on platforms without a working numba installation.
"""

import os

_requested = os.environ.get("MANIFOLD_BACKEND", "numba").strip().lower()

if _requested not in ("numba", "numpy"):
    raise RuntimeError(
        f"MANIFOLD_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

USE_NUMBA = _requested == "numba"

if USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

BACKEND = "numba" if USE_NUMBA else "numpy"


def jit_kernel(func, cache=True):
    """Compile a hot kernel with numba, or return it unchanged on the
    numpy backend. Kernels must be written in the nopython subset.

    ``cache=False`` is required for kernels that take other jit-compiled
    functions as arguments: numba cannot reliably pickle dispatcher types
    into the on-disk cache index.
    """
    if USE_NUMBA:
        import numba

        return numba.njit(cache=cache, nogil=True)(func)
    return func
