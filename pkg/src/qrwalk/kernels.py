"""Kernel backend selection.

The compiled extension ``qrwalk._kernels`` is used when it imports; otherwise
(or when ``QRWALK_PURE_PYTHON`` is set to a non-empty value) the numpy
implementations in ``qrwalk._kernels_py`` are used.  Both expose the same
functions with the same array contracts.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

_ext = None
if not os.environ.get("QRWALK_PURE_PYTHON"):
    try:
        from . import _kernels as _ext  # type: ignore[no-redef]
    except ImportError:  # extension not built
        _ext = None

BACKEND = "cython" if _ext is not None else "python"
_impl = _ext if _ext is not None else _kernels_py


def backends() -> dict:
    """All importable backends, keyed by name (used by tests and benchmarks)."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels

        found["cython"] = _kernels
    except ImportError:
        pass
    return found


def walk_products(branches, outcomes, v0) -> np.ndarray:
    return _impl.walk_products(
        np.ascontiguousarray(branches, dtype=np.complex128),
        np.ascontiguousarray(outcomes, dtype=np.intp),
        np.ascontiguousarray(v0, dtype=np.complex128),
    )


def linear_step(u, a, b, scale, z) -> None:
    """In-place batched update; ``u`` must be C-contiguous complex128."""
    _impl.linear_step(
        u,
        np.ascontiguousarray(a, dtype=np.complex128),
        np.ascontiguousarray(b, dtype=np.complex128),
        np.ascontiguousarray(scale, dtype=np.float64),
        np.ascontiguousarray(z, dtype=np.complex128),
    )
