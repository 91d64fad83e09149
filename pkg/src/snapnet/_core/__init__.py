"""Stepping-kernel backends.

The compiled Cython kernel and the pure-Python fallback implement the
same algorithm with the same floating-point operation order; results are
bit-identical. The compiled one is selected when importable unless
SNAPNET_PURE_PYTHON=1 forces the fallback.
"""

import os

from . import pykernel

_compiled = None
if os.environ.get("SNAPNET_PURE_PYTHON") != "1":
    try:
        from . import kernel as _compiled  # type: ignore[attr-defined]
    except ImportError:
        _compiled = None


def available_backends() -> list[str]:
    return ["compiled", "python"] if _compiled is not None else ["python"]


def get_backend(name: str | None = None):
    """Return the kernel module for `name` ('compiled', 'python' or None
    for the default)."""
    if name in (None, "default"):
        return _compiled if _compiled is not None else pykernel
    if name == "python":
        return pykernel
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernel is not available in this build")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def default_backend_name() -> str:
    return "compiled" if _compiled is not None else "python"
