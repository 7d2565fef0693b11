"""Kernel backend selection.

Two interchangeable implementations of the hot stencil matvec exist: a
Cython extension built at install time and a NumPy fallback. The
compiled one is preferred; PEAKLAB_PURE_PYTHON=1 forces the fallback.
Both produce bit-identical output (same accumulation order), so the
choice never changes numerical results, only speed.
"""

import os

from . import stencil_numpy

_COMPILED = None
if not os.environ.get("PEAKLAB_PURE_PYTHON"):
    try:
        from . import _stencil_cy as _COMPILED
    except ImportError:
        _COMPILED = None

_active = _COMPILED if _COMPILED is not None else stencil_numpy


def backend_name():
    """'compiled' or 'numpy', whichever apply_stencil currently runs on."""
    return "compiled" if _active is _COMPILED and _COMPILED is not None else "numpy"


def available_backends():
    names = ["numpy"]
    if _COMPILED is not None:
        names.insert(0, "compiled")
    return names


def set_backend(name):
    """Switch backends at runtime (used by tests and benchmarks)."""
    global _active
    if name == "numpy":
        _active = stencil_numpy
    elif name == "compiled":
        if _COMPILED is None:
            raise RuntimeError("compiled kernel not available")
        _active = _COMPILED
    else:
        raise ValueError(f"unknown backend {name!r}")
    return backend_name()


def apply_stencil(diag, nbr_idx, nbr_coef, x, out=None):
    return _active.apply_stencil(diag, nbr_idx, nbr_coef, x, out)
