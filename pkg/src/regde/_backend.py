"""Select the tree kernels: compiled extension when importable, else pure Python.

Set ``REGDE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels as python_kernels

try:
    if os.environ.get("REGDE_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python kernels requested")
    from . import _ckernels as compiled_kernels
except ImportError:
    compiled_kernels = None

kernels = compiled_kernels if compiled_kernels is not None else python_kernels
NAME = "compiled" if compiled_kernels is not None else "python"
