"""Kernel selection: compiled extension when built, pure Python otherwise."""
import os

BACKEND = "python"
if os.environ.get("YMLOOPS_PURE_PYTHON") != "1":
    try:
        from ._kernels import count_classes, count_classes_batch  # noqa: F401

        BACKEND = "cython"
    except ImportError:
        pass
if BACKEND == "python":
    from ._kernels_py import count_classes, count_classes_batch  # noqa: F401
