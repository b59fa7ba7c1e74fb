"""Hot-kernel backend selection.

The compiled extension (``_core``, built from ``_core.pyx``) is preferred;
the pure-numpy module ``_fallback`` implements the same contracts and is
used when the extension is missing or when DTAKIT_KERNELS=numpy is set.
``benchmarks/bench_kernels.py`` compares the two.
"""

import os

from . import _fallback

try:
    from . import _core
    _HAVE_COMPILED = True
except ImportError:
    _core = None
    _HAVE_COMPILED = False

if os.environ.get("DTAKIT_KERNELS", "").lower() == "numpy" or not _HAVE_COMPILED:
    _impl = _fallback
    BACKEND = "numpy"
else:
    _impl = _core
    BACKEND = "compiled"

COMPILED_AVAILABLE = _HAVE_COMPILED

# Crossover measured by benchmarks/bench_kernels.py: the direct C loop wins
# on small convolutions, but the fallback's im2col rides BLAS and is several
# times faster at protein-encoder channel counts.
_CONV_DIRECT_LIMIT = 4096  # c_out * c_in * k

if _impl is _fallback:
    conv1d_forward = _fallback.conv1d_forward
    conv1d_backward = _fallback.conv1d_backward
else:
    def conv1d_forward(x, w, bias, padding):
        if w.shape[0] * w.shape[1] * w.shape[2] <= _CONV_DIRECT_LIMIT:
            return _impl.conv1d_forward(x, w, bias, padding)
        return _fallback.conv1d_forward(x, w, bias, padding)

    def conv1d_backward(x, w, padding, gy):
        if w.shape[0] * w.shape[1] * w.shape[2] <= _CONV_DIRECT_LIMIT:
            return _impl.conv1d_backward(x, w, padding, gy)
        return _fallback.conv1d_backward(x, w, padding, gy)

segment_sum = _impl.segment_sum
segment_softmax = _impl.segment_softmax
scatter_add_rows = _impl.scatter_add_rows
jacobi_sweeps = _impl.jacobi_sweeps


def get_backend(name):
    """Return the kernel module for an explicit backend name."""
    if name == "numpy":
        return _fallback
    if name == "compiled":
        if not _HAVE_COMPILED:
            raise ImportError("compiled kernel extension is not available")
        return _core
    raise ValueError(f"unknown backend {name!r}")
