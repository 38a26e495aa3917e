"""Discretized classical phase space.

A :class:`PhaseGrid` is a uniform cell-centred grid over ``(x, p)`` in units with
hbar = 1. Scalar fields hold one real number per cell; matrix fields hold a
``d x d`` complex matrix per cell and are stored entry-major, ``(d, d, n_x, n_p)``.

Derivatives are second-order central differences. Two boundary treatments are
offered: ``"one-sided"`` (second-order one-sided stencils, exact for quadratics,
used for Hamiltonians) and ``"zero"`` (the field vanishes outside the box, which
makes the transport operator skew-symmetric and is what the time stepper uses
for states).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _backend
from .errors import DimMismatch, GridMismatch, InputError, KernelUnderresolved

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class PhaseGrid:
    x_min: float = -8.0
    x_max: float = 8.0
    p_min: float = -8.0
    p_max: float = 8.0
    n_x: int = 128
    n_p: int = 128

    def __post_init__(self):
        if int(self.n_x) != self.n_x or int(self.n_p) != self.n_p:
            raise InputError("cell counts must be integers")
        if self.n_x < 8 or self.n_p < 8:
            raise InputError(f"grid needs at least 8 cells per axis, got {self.n_x}x{self.n_p}")
        if not (self.x_max > self.x_min and self.p_max > self.p_min):
            raise InputError("grid bounds must satisfy x_min < x_max and p_min < p_max")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_x

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / self.n_p

    @property
    def cell_area(self) -> float:
        return self.dx * self.dp

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_x, self.n_p)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_x) + 0.5) * self.dx

    @property
    def p(self) -> np.ndarray:
        return self.p_min + (np.arange(self.n_p) + 0.5) * self.dp

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates ``X, P`` of shape ``(n_x, n_p)``."""
        return np.meshgrid(self.x, self.p, indexing="ij")

    def contains_box(self, x_lo, x_hi, p_lo, p_hi) -> bool:
        return self.x_min <= x_lo and self.x_max >= x_hi and self.p_min <= p_lo and self.p_max >= p_hi

    def nearest_cell(self, x: float, p: float) -> tuple[int, int]:
        i = int(np.clip(np.floor((x - self.x_min) / self.dx), 0, self.n_x - 1))
        j = int(np.clip(np.floor((p - self.p_min) / self.dp), 0, self.n_p - 1))
        return i, j

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: PhaseGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise GridMismatch(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise InputError("scalar field contains non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: PhaseGrid, func) -> "ScalarField":
        X, P = grid.mesh()
        return cls(grid, np.broadcast_to(func(X, P), grid.shape).astype(float))

    def to_csv(self, path) -> None:
        write_field_csv(self, path)


@dataclass(frozen=True, eq=False)
class MatrixField:
    grid: PhaseGrid
    values: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.ndim != 4 or values.shape[0] != values.shape[1] or values.shape[2:] != self.grid.shape:
            raise GridMismatch(
                f"matrix field must have shape (d, d, {self.grid.n_x}, {self.grid.n_p}), got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InputError("matrix field contains non-finite values")
        object.__setattr__(self, "values", values)
        if self.hermitian:
            defect = hermiticity_defect(values)
            if defect > HERMITIAN_TOL:
                raise InputError(f"field flagged Hermitian has defect {defect:.3e}")

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @classmethod
    def product(cls, matrix, scalar: ScalarField, hermitian: bool | None = None) -> "MatrixField":
        """Cellwise ``matrix * scalar(x, p)``."""
        m = np.asarray(matrix, dtype=complex)
        if hermitian is None:
            hermitian = bool(np.allclose(m, m.conj().T, atol=HERMITIAN_TOL, rtol=0))
        return cls(scalar.grid, m[:, :, None, None] * scalar.values[None, None], hermitian)

    @classmethod
    def from_function(cls, grid: PhaseGrid, func, hermitian=False) -> "MatrixField":
        """Build from ``func(X, P) -> (d, d, n_x, n_p)`` or ``(d, d)`` broadcastable array."""
        X, P = grid.mesh()
        v = np.asarray(func(X, P), dtype=complex)
        d = v.shape[0]
        return cls(grid, np.broadcast_to(v, (d, d) + grid.shape).copy(), hermitian)

    def cell(self, i: int, j: int) -> np.ndarray:
        return self.values[:, :, i, j].copy()

    def trace(self) -> ScalarField:
        return ScalarField(self.grid, np.einsum("aaij->ij", self.values).real)


Field = Union[ScalarField, MatrixField]


def hermiticity_defect(values: np.ndarray) -> float:
    """Largest entrywise ``|A - A^dag|`` over all cells of an entry-major field."""
    return float(np.max(np.abs(values - np.conj(np.swapaxes(values, 0, 1))), initial=0.0))


def _rebuild(f: Field, values) -> Field:
    if isinstance(f, ScalarField):
        return ScalarField(f.grid, values)
    return MatrixField(f.grid, values, f.hermitian)


def _derivative(f: Field, axis: int, boundary: str) -> Field:
    h = f.grid.dx if axis == 0 else f.grid.dp
    if boundary == "one-sided":
        vals = np.gradient(f.values, h, axis=f.values.ndim - 2 + axis, edge_order=2)
    elif boundary == "zero":
        v = f.values
        if isinstance(f, ScalarField):
            vals = _backend.diff_zero(v.astype(complex)[None, None], h, axis)[0, 0].real
        else:
            vals = _backend.diff_zero(v, h, axis)
    else:
        raise InputError(f"unknown boundary treatment {boundary!r}")
    return _rebuild(f, vals)


def partial_x(f: Field, boundary: str = "one-sided") -> Field:
    """Second-order central difference in x."""
    return _derivative(f, 0, boundary)


def partial_p(f: Field, boundary: str = "one-sided") -> Field:
    """Second-order central difference in p."""
    return _derivative(f, 1, boundary)


def field_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cellwise matrix product of two entry-major arrays."""
    return np.einsum("ik...,kj...->ij...", a, b)


def _promote(f: Field, d: int) -> np.ndarray:
    if isinstance(f, ScalarField):
        return np.eye(d)[:, :, None, None] * f.values[None, None]
    return f.values


def poisson_bracket(a: Field, b: Field) -> Field:
    """``da/dx db/dp - da/dp db/dx`` with matrix products in the written order.

    Scalars are promoted to ``scalar * identity`` when paired with a matrix
    field. For two matrix fields the result is generally not Hermitian and
    ``{a, b} != -{b, a}``.
    """
    if a.grid != b.grid:
        raise GridMismatch("poisson_bracket operands live on different grids")
    if isinstance(a, ScalarField) and isinstance(b, ScalarField):
        ax, ap = partial_x(a).values, partial_p(a).values
        bx, bp = partial_x(b).values, partial_p(b).values
        return ScalarField(a.grid, ax * bp - ap * bx)
    da = a.dim if isinstance(a, MatrixField) else None
    db = b.dim if isinstance(b, MatrixField) else None
    if da is not None and db is not None and da != db:
        raise DimMismatch(f"matrix dimensions differ: {da} vs {db}")
    d = da or db
    A = MatrixField(a.grid, _promote(a, d))
    B = MatrixField(b.grid, _promote(b, d))
    ax, ap = partial_x(A).values, partial_p(A).values
    bx, bp = partial_x(B).values, partial_p(B).values
    return MatrixField(a.grid, field_matmul(ax, bp) - field_matmul(ap, bx))


KERNEL_VARIANCE = 0.5


def _axis_kernel(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None] - coords[None, :]
    k = np.exp(-diff * diff / (2.0 * KERNEL_VARIANCE))
    # each source cell spreads exactly its own mass, also where the kernel is cut by the edge
    return k / k.sum(axis=0, keepdims=True)


def coarse_grain(f: Field) -> Field:
    """Convolve every entry with the unit-mass Gaussian ``exp(-(xi^2 + eta^2)) / pi``.

    The kernel has variance 1/2 per axis (one Planck cell with hbar = 1). Near
    the box edges the kernel is truncated and each source column renormalized,
    so the total integral is conserved exactly up to rounding.
    """
    g = f.grid
    if g.dx > 1.0 or g.dp > 1.0:
        raise KernelUnderresolved(
            f"cell size ({g.dx:.3g}, {g.dp:.3g}) too coarse for the unit Gaussian kernel; need <= 1.0"
        )
    kx = _axis_kernel(g.x)
    kp = _axis_kernel(g.p)
    tmp = np.einsum("ik,...kl->...il", kx, f.values)
    out = np.einsum("...il,jl->...ij", tmp, kp)
    return _rebuild(f, out)


def integrate(f: Field):
    """Riemann sum over cells times the cell area; a float or a ``d x d`` matrix."""
    total = f.values.sum(axis=(-2, -1)) * f.grid.cell_area
    if isinstance(f, ScalarField):
        return float(total)
    return total


@dataclass(frozen=True)
class AdmissibilityReport:
    distance: float
    admissible: bool


def admissibility_check(f: MatrixField, tol: float = 0.5) -> AdmissibilityReport:
    """Heuristic test that a hybrid state has no structure below the Planck-cell scale.

    ``distance`` is the largest cellwise trace norm of ``f - coarse_grain(f)``
    divided by the largest cell trace. A state that is already smooth on the
    kernel scale changes little under one more smoothing. This is a screening
    heuristic, not a sufficient condition for positivity.
    """
    diff = f.values - coarse_grain(f).values
    cells = np.moveaxis(diff, (0, 1), (-2, -1))
    cells = 0.5 * (cells + np.conj(np.swapaxes(cells, -1, -2)))
    trace_norm = np.abs(np.linalg.eigvalsh(cells)).sum(axis=-1)
    scale = np.max(np.abs(np.einsum("aaij->ij", f.values).real))
    if scale == 0.0:
        return AdmissibilityReport(float("inf"), False)
    distance = float(trace_norm.max() / scale)
    return AdmissibilityReport(distance, distance <= tol)


def write_field_csv(field: Field, path) -> None:
    """Write ``x,p,value`` rows (row-major over cells, 17 significant digits).

    Matrix fields are exported through their cellwise trace.
    """
    if isinstance(field, MatrixField):
        field = field.trace()
    X, P = field.grid.mesh()
    rows = np.column_stack([X.ravel(), P.ravel(), field.values.ravel()])
    np.savetxt(path, rows, delimiter=",", fmt="%.17g", header="x,p,value", comments="", newline="\n")
