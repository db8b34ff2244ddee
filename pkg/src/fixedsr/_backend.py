"""Kernel backend selection.

The compiled extension is used when importable; set ``FIXEDSR_PURE_PYTHON=1``
to force the pure-Python fallback.
"""

import os

from . import _kernels_py as python_kernels

compiled_kernels = None
if os.environ.get("FIXEDSR_PURE_PYTHON") != "1":
    try:
        from . import _kernels as compiled_kernels
    except ImportError:  # extension not built
        compiled_kernels = None

kernels = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = kernels.BACKEND
