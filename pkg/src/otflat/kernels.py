"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the pure-Python
twin is used.  Set ``OTFLAT_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
if os.environ.get("OTFLAT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

network_simplex = _impl.network_simplex
wasserstein_1d = _impl.wasserstein_1d
wasserstein_1d_batch = _impl.wasserstein_1d_batch

__all__ = ["BACKEND", "network_simplex", "wasserstein_1d", "wasserstein_1d_batch"]
