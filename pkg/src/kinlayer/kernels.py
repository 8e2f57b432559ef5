"""Kernel selection: the compiled extension when it imports, numpy otherwise."""
import os

try:
    if os.environ.get("KINLAYER_PURE_PYTHON"):
        raise ImportError("pure-python kernels requested")
    from ._kernels import muscl_faces, sweep  # noqa: F401
    BACKEND = "compiled"
except ImportError:
    from ._kernels_py import muscl_faces, sweep  # noqa: F401
    BACKEND = "python"
