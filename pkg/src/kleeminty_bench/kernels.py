"""Kernel backend selection.

The compiled extension is used when it was built; set
``KLEEMINTY_PURE_PYTHON=1`` to force the numpy implementation.
"""
import os

BACKEND = "python"

if os.environ.get("KLEEMINTY_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._ckernels import evaluate_batch, improvement_indices, rotate_batch

        BACKEND = "cython"
    except ImportError:
        pass

if BACKEND == "python":
    from ._pykernels import evaluate_batch, improvement_indices, rotate_batch

__all__ = ["BACKEND", "evaluate_batch", "improvement_indices", "rotate_batch"]
