"""Hot numeric kernels with a numba and a pure-numpy implementation.

The numba path is used by default whenever numba imports cleanly.  Set the
environment variable ``TARIFF_OPT_NO_NUMBA=1`` before import to force the
pure-numpy fallback (useful for debugging and for the benchmark in
``bench/bench_kernels.py``).

Both implementations follow the same algorithms; results agree to floating
point roundoff (summation order may differ).
"""

from __future__ import annotations

import os

from . import numpy_impl

_FLAG = os.environ.get("TARIFF_OPT_NO_NUMBA", "").strip().lower()
_DISABLED = _FLAG in {"1", "true", "yes", "on"}

if not _DISABLED:
    try:
        from . import numba_impl as _backend

        _BACKEND_NAME = "numba"
    except ImportError:  # pragma: no cover - depends on environment
        _backend = numpy_impl
        _BACKEND_NAME = "numpy"
else:
    _backend = numpy_impl
    _BACKEND_NAME = "numpy"


def backend_name() -> str:
    return _BACKEND_NAME


project_sum_box = _backend.project_sum_box
mean_shift_modes_1d = _backend.mean_shift_modes_1d
pairwise_sq_dists = _backend.pairwise_sq_dists
simulate_demand = _backend.simulate_demand

__all__ = [
    "backend_name",
    "project_sum_box",
    "mean_shift_modes_1d",
    "pairwise_sq_dists",
    "simulate_demand",
    "numpy_impl",
]
