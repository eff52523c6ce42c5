"""Backend selection for the batch kernels.

The compiled extension is used when it was built; set ``FYVI_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels
if not os.environ.get("FYVI_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        pass

entmax_bisect_rows = _impl.entmax_bisect_rows
sparsemax_rows = _impl.sparsemax_rows
softmax_rows = _impl.softmax_rows
