"""Kernel backend selection.

A compiled extension provides the stencil and solver kernels when it built
successfully; otherwise the NumPy/SciPy fallback is used.  Selection happens
once at import.  Set ``SDWAVE_PURE_PYTHON=1`` to force the fallback, or call
``use("python"|"cython")`` to switch explicitly (tests and benchmarks do).
"""

import os

from . import _fallback

_EXPORTED = (
    "laplacian_1d",
    "laplacian_2d",
    "grad_inner_1d",
    "grad_inner_2d",
    "solve_shifted_1d",
    "cg_shifted_2d",
)

_compiled = None
if os.environ.get("SDWAVE_PURE_PYTHON", "") != "1":
    try:
        from . import _core as _compiled  # type: ignore[attr-defined]
    except ImportError:
        _compiled = None

_active = _compiled if _compiled is not None else _fallback


def _bind(module):
    g = globals()
    for name in _EXPORTED:
        g[name] = getattr(module, name)
    g["backend_name"] = module.BACKEND


def available_backends():
    names = ["python"]
    if _compiled is not None:
        names.append("cython")
    return tuple(names)


def use(name):
    """Rebind the kernel functions to the named backend."""
    global _active
    if name == "python":
        _active = _fallback
    elif name == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernel backend is not available")
        _active = _compiled
    else:
        raise ValueError(f"unknown backend {name!r}")
    _bind(_active)
    return backend_name


_bind(_active)
