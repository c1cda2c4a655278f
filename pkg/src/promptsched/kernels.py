"""Hot-kernel dispatch: the compiled extension when importable, else numpy.

Set ``PROMPTSCHED_PURE_PYTHON=1`` to force the numpy fallback. Both backends
are deterministic, but they do not agree bit-for-bit with each other, so a
run is only reproducible against the backend that produced it.
"""

import os

if os.environ.get("PROMPTSCHED_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND

softmax_forward = _impl.softmax_forward
softmax_backward = _impl.softmax_backward
layer_norm_forward = _impl.layer_norm_forward
layer_norm_backward = _impl.layer_norm_backward
cross_entropy_forward = _impl.cross_entropy_forward
cross_entropy_backward = _impl.cross_entropy_backward
embedding_backward = _impl.embedding_backward
