"""Backend selection for the hot kernels.

The compiled extension is used when it imports cleanly; otherwise, or when
``FERMITUBE_PURE_PYTHON=1`` is set, the numpy implementations are used.
``BACKEND`` tells which one is active.
"""
import os

from . import _pykernels

_ckernels = None
if os.environ.get("FERMITUBE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        _ckernels = None

if _ckernels is not None:
    BACKEND = "compiled"
    geometry_batch = _ckernels.geometry_batch
    christoffel_batch = _ckernels.christoffel_batch
    jacobi_rk4 = _ckernels.jacobi_rk4
    integrate_param_orbit = _ckernels.integrate_param_orbit
else:
    BACKEND = "python"
    geometry_batch = _pykernels.geometry_batch
    christoffel_batch = _pykernels.christoffel_batch
    jacobi_rk4 = _pykernels.jacobi_rk4
    integrate_param_orbit = None


def compiled():
    """The compiled module, or None when it is unavailable."""
    return _ckernels
