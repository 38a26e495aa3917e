"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy versions in
``_kernels_py`` take over. Setting ``HYBRIDYN_PURE_PYTHON=1`` forces the
fallback, and :func:`use` switches at runtime (tests and the benchmark do this).
"""

import contextlib
import os

from . import _kernels_py

_compiled = None
if not os.environ.get("HYBRIDYN_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

_active = "cython" if _compiled is not None else "python"


def available():
    """Names of the backends that can be selected in this installation."""
    return ["cython", "python"] if _compiled is not None else ["python"]


def name():
    return _active


def set_backend(backend):
    global _active
    if backend not in available():
        raise ValueError(f"backend {backend!r} not available; have {available()}")
    _active = backend


@contextlib.contextmanager
def use(backend):
    previous = _active
    set_backend(backend)
    try:
        yield
    finally:
        set_backend(previous)


def diff_zero(f, h, axis):
    if _active == "cython":
        return _compiled.diff_zero(f, h, axis)
    return _kernels_py.diff_zero(f, h, axis)


def assemble(H, Hx, Hp, rho, rx, rp, corrected):
    if _active == "cython" and rho.shape[0] <= 4:
        return _compiled.assemble(H, Hx, Hp, rho, rx, rp, corrected)
    return _kernels_py.assemble(H, Hx, Hp, rho, rx, rp, corrected)


def min_eig(rho):
    if _active == "cython" and rho.shape[0] == 2:
        return _compiled.min_eig(rho)
    return _kernels_py.min_eig(rho)
