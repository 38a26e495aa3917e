"""Hybrid quantum-classical dynamics on a phase-space grid.

Submodules
----------
phase_space
    Grids, fields, derivatives, brackets and Planck-cell smoothing.
collapse
    Pointer-mediated position measurement and the Gaussian hit.
hybrid
    Hybrid states, generators, time stepping and diagnostics.
stern_gerlach
    Spin read out by an impulsively coupled classical pointer.
cli
    The ``hybridyn`` command.
"""

__version__ = "0.1.0"

from . import collapse, hybrid, phase_space, stern_gerlach  # noqa: E402,F401
from ._backend import available as available_backends  # noqa: E402,F401
from ._backend import name as backend  # noqa: E402,F401
