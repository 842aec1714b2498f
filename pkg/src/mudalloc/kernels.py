"""Backend selection for the hot kernels.

The compiled extension is preferred; the numpy fallback is used if it is
missing or if the environment variable ``MUDALLOC_PURE_PYTHON`` is set to a
non-empty value other than ``0``.
"""
import os

from . import _pykernels

_force_py = os.environ.get("MUDALLOC_PURE_PYTHON", "") not in ("", "0")

if _force_py:
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"

dykstra_project = _impl.dykstra_project
separable_sqrt_linear = _impl.separable_sqrt_linear

__all__ = ["BACKEND", "dykstra_project", "separable_sqrt_linear"]
