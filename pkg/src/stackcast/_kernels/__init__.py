"""Hot-loop kernels with a compiled backend and a pure numpy fallback.

The compiled extension is used when it imports; set ``STACKCAST_BACKEND=python``
to force the fallback (the benchmark and backend-agreement tests do this per call
through :func:`get_backend`).
"""

import os
import warnings

from . import _fallback

try:
    from . import _ckernels
except ImportError as exc:  # pragma: no cover - depends on the build
    _ckernels = None
    _IMPORT_ERROR = exc
else:
    _IMPORT_ERROR = None

COMPILED_AVAILABLE = _ckernels is not None


def get_backend(name=None):
    """Return the kernel module for ``name`` (``"cython"``, ``"python"`` or ``None`` = default)."""
    if name is None:
        name = BACKEND
    if name == "python":
        return _fallback
    if name == "cython":
        if _ckernels is None:
            raise ImportError(f"compiled kernels unavailable: {_IMPORT_ERROR}")
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


_requested = os.environ.get("STACKCAST_BACKEND", "").strip().lower()
if _requested == "python":
    BACKEND = "python"
elif COMPILED_AVAILABLE:
    BACKEND = "cython"
else:
    if _requested == "cython":
        warnings.warn(f"compiled kernels unavailable ({_IMPORT_ERROR}); using numpy fallback")
    BACKEND = "python"

_impl = get_backend(BACKEND)
build_tree = _impl.build_tree
predict_tree = _impl.predict_tree
svr_smo = _impl.svr_smo
enet_cd = _impl.enet_cd

__all__ = ["BACKEND", "COMPILED_AVAILABLE", "get_backend", "build_tree", "predict_tree",
           "svr_smo", "enet_cd"]
