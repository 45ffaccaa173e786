"""Hot loops: compiled when available, pure Python otherwise.

Set GIBBS_SHIFT_PURE_PYTHON=1 to force the fallback.
"""

import os

from . import _pykernels as python_kernels

compiled_kernels = None
if os.environ.get("GIBBS_SHIFT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_kernels
    except ImportError:
        compiled_kernels = None

active = compiled_kernels if compiled_kernels is not None else python_kernels
IMPLEMENTATION = active.IMPLEMENTATION


def get(name: str | None = None):
    """Kernel module by name ('cython' or 'python'); None gives the active one."""
    if name is None:
        return active
    if name == "python":
        return python_kernels
    if name == "cython":
        if compiled_kernels is None:
            raise ImportError("compiled kernels are not built")
        return compiled_kernels
    raise ValueError(f"unknown kernel implementation {name!r}")
