"""Select the compiled kernels when importable, else the numpy fallback.

Set ``XQGRAM_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_python

python_kernels = _kernels_python

try:
    from . import _kernels as compiled_kernels
except ImportError:  # pragma: no cover - exercised only without a C toolchain
    compiled_kernels = None

if compiled_kernels is not None and not os.environ.get("XQGRAM_PURE_PYTHON"):
    kernels = compiled_kernels
    BACKEND = "cython"
else:
    kernels = _kernels_python
    BACKEND = "python"


def get_kernels(name=None):
    """Kernel module by name (``"cython"`` or ``"python"``); ``None`` gives the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_python
    if name == "cython":
        if compiled_kernels is None:
            raise ImportError("compiled kernels are not built")
        return compiled_kernels
    raise ValueError(f"unknown backend {name!r}")
