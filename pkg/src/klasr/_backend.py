"""Kernel selection.

The compiled ``_ckernels`` module is used when it imports cleanly, unless
``KLASR_PURE_PYTHON=1`` is set in the environment.
"""
import os

from . import _pykernels

kernels = _pykernels
BACKEND = "python"

if os.environ.get("KLASR_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        kernels = _ckernels
        BACKEND = "cython"


def available_backends():
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        return out
    out["cython"] = _ckernels
    return out
