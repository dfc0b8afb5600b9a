"""Dispatch layer for the hot kernels (see backend.py for selection)."""

from . import backend as _backend
from . import _kernels_np as _np_impl

if _backend.ACTIVE == "numba":
    from . import _kernels_nb as _impl
else:
    _impl = _np_impl

conv2d_forward = _impl.conv2d_forward
conv2d_grads = _impl.conv2d_grads
conv2d_input_grad = _impl.conv2d_input_grad
tdlms_scan = _impl.tdlms_scan

# The numpy implementations stay importable for the backend benchmark and
# for cross-checking in tests.
numpy_impl = _np_impl
