"""Hybrid quantum-classical states and their equations of motion.

A hybrid state assigns a ``d x d`` positive matrix to every phase-space cell.
Its cellwise trace is the classical distribution and its phase-space integral
the quantum density matrix. Two generators are provided: the bare bracket
combination (``naive_generator``), which can break positivity, and the version
with the two derivative-commutator corrections (``corrected_generator``).

Inside the generators the state is differentiated with central differences
that treat everything outside the box as zero. Hamiltonian derivatives use the
one-sided boundary stencil, which is exact for the quadratic Hamiltonians used
throughout.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from . import _backend
from .errors import (
    ConditionOnNullEvent,
    DimMismatch,
    GridMismatch,
    InputError,
    InvalidDensityMatrix,
    InvalidDistribution,
    NonFiniteState,
    StepTooLarge,
)
from .phase_space import (
    MatrixField,
    PhaseGrid,
    ScalarField,
    admissibility_check,
    coarse_grain,
    hermiticity_defect,
    integrate,
    partial_p,
    partial_x,
)

log = logging.getLogger(__name__)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

EPS_POS = 1e-9
TRACE_TOL = 1e-8
COND_THRESHOLD = 1e-12
DRIFT_TOL = 1e-8
CFL = 0.25


class AdmissibilityWarning(UserWarning):
    """The state has structure below the Planck-cell scale."""


class ClassicalDistribution(ScalarField):
    """A scalar field meant to be a probability density over phase space.

    Nothing beyond finiteness is enforced on construction, because marginals of
    evolved states may carry small negative noise. Use :func:`check_distribution`
    where normalization and non-negativity are preconditions.
    """

    def mass(self) -> float:
        return integrate(self)


def gaussian_distribution(grid: PhaseGrid, x0=0.0, p0=0.0, var_x=1.0, var_p=1.0) -> ClassicalDistribution:
    """Normal density sampled at the cell centres (not renormalized on the grid)."""
    X, P = grid.mesh()
    vals = np.exp(-((X - x0) ** 2) / (2 * var_x) - (P - p0) ** 2 / (2 * var_p))
    return ClassicalDistribution(grid, vals / (2 * np.pi * np.sqrt(var_x * var_p)))


def check_distribution(rho_c: ScalarField, tol: float = TRACE_TOL) -> None:
    if np.min(rho_c.values) < 0:
        raise InvalidDistribution(f"classical density has negative cells (min {np.min(rho_c.values):.3e})")
    mass = integrate(rho_c)
    if abs(mass - 1.0) > tol:
        raise InvalidDistribution(f"classical density integrates to {mass!r}, expected 1")


def check_density_matrix(rho_q, tol: float = 1e-10) -> np.ndarray:
    m = np.asarray(rho_q, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidDensityMatrix(f"density matrix must be square, got shape {m.shape}")
    if np.max(np.abs(m - m.conj().T)) > 1e-12:
        raise InvalidDensityMatrix("density matrix is not Hermitian")
    if abs(np.trace(m).real - 1.0) > tol:
        raise InvalidDensityMatrix(f"density matrix has trace {np.trace(m).real!r}")
    if np.linalg.eigvalsh(m)[0] < -tol:
        raise InvalidDensityMatrix("density matrix is not positive semidefinite")
    return m


@dataclass(frozen=True, eq=False)
class HybridState:
    """Hermitian matrix field with unit total trace.

    Parameters
    ----------
    field
        Entry-major matrix field of shape ``(d, d, n_x, n_p)``.
    check
        Verify Hermiticity (1e-12) and total trace (1e-8). Positivity is only
        monitored, see :func:`positivity_report`.
    """

    field: MatrixField
    check: bool = True

    def __post_init__(self):
        if self.check:
            defect = hermiticity_defect(self.field.values)
            if defect > 1e-12:
                raise InputError(f"hybrid state is not Hermitian (defect {defect:.3e})")
            total = self.total_trace()
            if abs(total - 1.0) > TRACE_TOL:
                raise InputError(f"hybrid state has total trace {total!r}, expected 1")

    @classmethod
    def from_values(cls, grid: PhaseGrid, values, check=True) -> "HybridState":
        return cls(MatrixField(grid, values), check)

    @property
    def grid(self) -> PhaseGrid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def dim(self) -> int:
        return self.field.dim

    def total_trace(self) -> float:
        return float(np.einsum("aaij->", self.field.values).real * self.grid.cell_area)


def product_state(rho_q, rho_c: ScalarField) -> HybridState:
    """Uncorrelated hybrid state ``rho_q * rho_c(x, p)``."""
    m = check_density_matrix(rho_q)
    check_distribution(rho_c)
    return HybridState(MatrixField.product(m, rho_c, hermitian=True))


def classical_marginal(state: HybridState) -> ClassicalDistribution:
    return ClassicalDistribution(state.grid, np.einsum("aaij->ij", state.values).real)


def quantum_marginal(state: HybridState) -> np.ndarray:
    return integrate(state.field)


def _threshold_mask(rho_c: np.ndarray, threshold: float) -> np.ndarray:
    top = np.max(rho_c)
    return rho_c > threshold * top if top > 0 else np.zeros(rho_c.shape, dtype=bool)


def conditional_state(state: HybridState, cell, threshold: float = COND_THRESHOLD) -> np.ndarray:
    """Quantum state conditioned on the classical cell ``(i, j)``.

    Raises :class:`ConditionOnNullEvent` where the cell mass is below
    ``threshold`` times the largest cell mass.
    """
    i, j = cell
    rho_c = np.einsum("aaij->ij", state.values).real
    if not _threshold_mask(rho_c, threshold)[i, j]:
        raise ConditionOnNullEvent(f"classical density at cell {(i, j)} is below the conditioning threshold")
    return state.values[:, :, i, j] / rho_c[i, j]


@dataclass(frozen=True, eq=False)
class HybridHamiltonian:
    """``h_q + h_c(x, p) * I + h_int(x, p)``.

    ``h_c`` and ``h_int`` may be omitted (zero). Derivatives are computed once
    with one-sided boundary stencils and cached.
    """

    h_q: np.ndarray
    h_c: Optional[ScalarField] = None
    h_int: Optional[MatrixField] = None
    grid: Optional[PhaseGrid] = None

    def __post_init__(self):
        hq = np.asarray(self.h_q, dtype=complex)
        if hq.ndim != 2 or hq.shape[0] != hq.shape[1]:
            raise InputError("h_q must be a square matrix")
        if np.max(np.abs(hq - hq.conj().T)) > 1e-12:
            raise InputError("h_q is not Hermitian")
        object.__setattr__(self, "h_q", hq)
        grids = [f.grid for f in (self.h_c, self.h_int) if f is not None]
        if self.grid is not None:
            grids.append(self.grid)
        if not grids:
            raise InputError("HybridHamiltonian needs a grid when h_c and h_int are absent")
        if any(g != grids[0] for g in grids):
            raise GridMismatch("Hamiltonian parts live on different grids")
        object.__setattr__(self, "grid", grids[0])
        if self.h_int is not None:
            if self.h_int.dim != hq.shape[0]:
                raise DimMismatch(f"h_int has dim {self.h_int.dim}, h_q has {hq.shape[0]}")
            defect = hermiticity_defect(self.h_int.values)
            if defect > 1e-12:
                raise InputError(f"h_int is not Hermitian (defect {defect:.3e})")

    @classmethod
    def build(cls, grid: PhaseGrid, h_q=None, h_c: Callable | None = None,
              h_int: Callable | None = None, dim: int = 2) -> "HybridHamiltonian":
        """Assemble from callables ``h_c(X, P)`` and ``h_int(X, P) -> (d, d, ...)``."""
        hq = np.zeros((dim, dim), complex) if h_q is None else np.asarray(h_q, complex)
        hc = ScalarField.from_function(grid, h_c) if h_c is not None else None
        hi = MatrixField.from_function(grid, h_int) if h_int is not None else None
        return cls(hq, hc, hi, grid)

    @property
    def dim(self) -> int:
        return self.h_q.shape[0]

    @cached_property
    def values(self) -> np.ndarray:
        d = self.dim
        out = np.broadcast_to(self.h_q[:, :, None, None], (d, d) + self.grid.shape).copy()
        if self.h_c is not None:
            out += np.eye(d)[:, :, None, None] * self.h_c.values[None, None]
        if self.h_int is not None:
            out += self.h_int.values
        return out

    @cached_property
    def dx_values(self) -> np.ndarray:
        return partial_x(MatrixField(self.grid, self.values)).values

    @cached_property
    def dp_values(self) -> np.ndarray:
        return partial_p(MatrixField(self.grid, self.values)).values

    def max_speed(self) -> float:
        """Largest spectral norm of dH/dx and dH/dp over all cells."""
        def top(a):
            cells = np.moveaxis(a, (0, 1), (-2, -1))
            cells = 0.5 * (cells + np.conj(np.swapaxes(cells, -1, -2)))
            return float(np.max(np.abs(np.linalg.eigvalsh(cells)), initial=0.0))
        return max(top(self.dx_values), top(self.dp_values))

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "h_q": [[[z.real, z.imag] for z in row] for row in self.h_q],
            "has_h_c": self.h_c is not None,
            "has_h_int": self.h_int is not None,
        }


def harmonic_potential(X, P):
    return 0.5 * (X * X + P * P)


def linear_coupling(lam: float, matrix, coordinate: str = "x") -> Callable:
    """``h_int(X, P) = lam * coordinate * matrix`` as a callable for :meth:`HybridHamiltonian.build`."""
    m = np.asarray(matrix, dtype=complex)
    if coordinate not in ("x", "p"):
        raise InputError(f"coordinate must be 'x' or 'p', got {coordinate!r}")

    def h_int(X, P):
        c = X if coordinate == "x" else P
        return lam * m[:, :, None, None] * c[None, None]
    return h_int


def _spectral_diff(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    ax = f.ndim - 2 + axis
    n = f.shape[ax]
    k = 2 * np.pi * np.fft.fftfreq(n, d=h)
    if n % 2 == 0:
        k[n // 2] = 0.0
    shape = [1] * f.ndim
    shape[ax] = n
    return np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(f, axis=ax), axis=ax)


def _state_derivatives(rho: np.ndarray, grid: PhaseGrid, scheme: str):
    if scheme == "central":
        return _backend.diff_zero(rho, grid.dx, 0), _backend.diff_zero(rho, grid.dp, 1)
    if scheme == "spectral":
        return _spectral_diff(rho, grid.dx, 0), _spectral_diff(rho, grid.dp, 1)
    raise InputError(f"unknown differentiation scheme {scheme!r}; use 'central' or 'spectral'")


def _rhs(H: HybridHamiltonian, rho: np.ndarray, corrected: bool, scheme: str) -> np.ndarray:
    rx, rp = _state_derivatives(rho, H.grid, scheme)
    return _backend.assemble(H.values, H.dx_values, H.dp_values, rho, rx, rp, corrected)


def _check_pair(H: HybridHamiltonian, state: HybridState) -> None:
    if H.grid != state.grid:
        raise GridMismatch("Hamiltonian and state live on different grids")
    if H.dim != state.dim:
        raise DimMismatch(f"Hamiltonian dim {H.dim} differs from state dim {state.dim}")


def naive_generator(H: HybridHamiltonian, state: HybridState, scheme: str = "central") -> MatrixField:
    """``-i[H, rho] + 1/2 {H, rho}_P - 1/2 {rho, H}_P`` cellwise."""
    _check_pair(H, state)
    return MatrixField(state.grid, _rhs(H, state.values, False, scheme), hermitian=True)


def corrected_generator(H: HybridHamiltonian, state: HybridState, scheme: str = "central",
                        check_admissibility: bool = True) -> MatrixField:
    """Naive generator plus ``-i/2 [dH/dx, drho/dx] - i/2 [dH/dp, drho/dp]``.

    Emits :class:`AdmissibilityWarning` when the state fails
    :func:`admissibility_check`; positivity is only expected for smooth states.
    """
    _check_pair(H, state)
    if check_admissibility:
        _warn_if_inadmissible(state)
    return MatrixField(state.grid, _rhs(H, state.values, True, scheme), hermitian=True)


def correction_terms(H: HybridHamiltonian, state: HybridState, scheme: str = "central") -> MatrixField:
    """The two commutator corrections on their own, via explicit matrix products."""
    _check_pair(H, state)
    rx, rp = _state_derivatives(state.values, state.grid, scheme)
    Hx, Hp = H.dx_values, H.dp_values

    def comm(a, b):
        return np.einsum("ik...,kj...->ij...", a, b) - np.einsum("ik...,kj...->ij...", b, a)
    return MatrixField(state.grid, -0.5j * comm(Hx, rx) - 0.5j * comm(Hp, rp))


def _warn_if_inadmissible(state: HybridState) -> None:
    report = admissibility_check(state.field)
    if not report.admissible:
        warnings.warn(
            f"state is not coarse-grained on the Planck scale (distance {report.distance:.3g}); "
            "positivity of the corrected dynamics is not expected",
            AdmissibilityWarning,
            stacklevel=3,
        )


@dataclass
class PositivityTrace:
    """Per-step diagnostics of a time-stepping run.

    ``total_trace`` is the total trace just before the post-step renormalization,
    so its distance from 1 is the drift produced by that step. ``cumulative_drift``
    sums that distance over every step, recorded or not, and ``elapsed`` is the
    integrated time.
    """

    t: list = field(default_factory=list)
    min_eig: list = field(default_factory=list)
    total_trace: list = field(default_factory=list)
    hermiticity: list = field(default_factory=list)
    cumulative_drift: float = 0.0
    elapsed: float = 0.0

    def append(self, t, min_eig, total_trace, hermiticity):
        self.t.append(float(t))
        self.min_eig.append(float(min_eig))
        self.total_trace.append(float(total_trace))
        self.hermiticity.append(float(hermiticity))

    def extend(self, other: "PositivityTrace") -> None:
        for name in ("t", "min_eig", "total_trace", "hermiticity"):
            getattr(self, name).extend(getattr(other, name))
        self.cumulative_drift += other.cumulative_drift
        self.elapsed += other.elapsed

    @property
    def lowest(self) -> float:
        return min(self.min_eig) if self.min_eig else float("nan")

    @property
    def max_drift(self) -> float:
        return max((abs(v - 1.0) for v in self.total_trace), default=0.0)

    @property
    def drift_rate(self) -> float:
        """Accumulated trace drift per unit time."""
        return self.cumulative_drift / self.elapsed if self.elapsed > 0 else 0.0

    def to_csv(self, path) -> None:
        rows = np.column_stack([self.t, self.min_eig, self.total_trace])
        np.savetxt(path, rows.reshape(-1, 3), delimiter=",", fmt="%.17g",
                   header="t,min_eig,total_trace", comments="", newline="\n")


def max_stable_dt(H: HybridHamiltonian) -> float:
    """Upper bound ``0.25 min(dx, dp) / V_max`` on the step size (inf if nothing moves)."""
    v = H.max_speed()
    return float("inf") if v == 0 else CFL * min(H.grid.dx, H.grid.dp) / v


def step(state: HybridState, H: HybridHamiltonian, dt: float, n_steps: int,
         generator: str = "corrected", scheme: str = "central", record_every: int = 1,
         check_admissibility: bool = True, t0: float = 0.0):
    """Integrate with classical RK4 at fixed ``dt``.

    After every step the total trace is rescaled back to 1; the pre-rescale value
    goes into the returned :class:`PositivityTrace` together with the minimum
    cell eigenvalue and the Hermiticity defect (every ``record_every`` steps,
    plus the initial state). Negative eigenvalues are recorded, never clipped.

    Returns
    -------
    (HybridState, PositivityTrace)
    """
    _check_pair(H, state)
    if generator not in ("naive", "corrected"):
        raise InputError(f"generator must be 'naive' or 'corrected', got {generator!r}")
    if not dt > 0 or n_steps < 0 or int(n_steps) != n_steps:
        raise InputError("need dt > 0 and a non-negative integer n_steps")
    dt_max = max_stable_dt(H)
    if dt > dt_max:
        raise StepTooLarge(f"dt = {dt:g} exceeds the transport bound {dt_max:.6g}")
    corrected = generator == "corrected"
    if corrected and check_admissibility:
        _warn_if_inadmissible(state)

    area = state.grid.cell_area
    rho = state.values.copy()
    trace = PositivityTrace()
    trace.append(t0, _backend.min_eig(rho).min(), state.total_trace(), hermiticity_defect(rho))

    def f(r):
        return _rhs(H, r, corrected, scheme)

    for n in range(1, int(n_steps) + 1):
        k1 = f(rho)
        k2 = f(rho + (0.5 * dt) * k1)
        k3 = f(rho + (0.5 * dt) * k2)
        k4 = f(rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(rho)):
            raise NonFiniteState(f"state became non-finite at step {n} (t = {t0 + n * dt:g})")
        total = float(np.einsum("aaij->", rho).real * area)
        if not total > 0:
            raise NonFiniteState(f"total trace collapsed to {total!r} at step {n}")
        if abs(total - 1.0) > DRIFT_TOL:
            log.warning("trace drift %.3e at step %d exceeds %.0e", total - 1.0, n, DRIFT_TOL)
        rho /= total
        trace.cumulative_drift += abs(total - 1.0)
        trace.elapsed += dt
        if n % record_every == 0 or n == n_steps:
            trace.append(t0 + n * dt, _backend.min_eig(rho).min(), total, hermiticity_defect(rho))
    return HybridState(MatrixField(state.grid, rho), check=False), trace


@dataclass(frozen=True)
class PositivityReport:
    min_eig: float
    argmin_cell: tuple
    n_negative_cells: int


def cell_min_eigenvalues(state: HybridState) -> np.ndarray:
    return _backend.min_eig(state.values)


def positivity_report(state: HybridState, eps: float = EPS_POS) -> PositivityReport:
    """Smallest cell eigenvalue, where it sits, and how many cells fall below ``-eps``."""
    lam = cell_min_eigenvalues(state)
    idx = np.unravel_index(int(np.argmin(lam)), lam.shape)
    return PositivityReport(float(lam[idx]), (int(idx[0]), int(idx[1])), int(np.sum(lam < -eps)))


@dataclass(frozen=True, eq=False)
class FlowField:
    """Classical velocity field driven by conditional quantum expectations.

    ``defined`` marks cells above the conditioning threshold; the velocity is
    set to zero elsewhere.
    """

    xdot: ScalarField
    pdot: ScalarField
    defined: np.ndarray


def mean_field_flow(H: HybridHamiltonian, state: HybridState, threshold: float = COND_THRESHOLD) -> FlowField:
    """``xdot = tr(dH/dp rho_xp)``, ``pdot = -tr(dH/dx rho_xp)`` per cell."""
    _check_pair(H, state)
    rho = state.values
    rho_c = np.einsum("aaij->ij", rho).real
    mask = _threshold_mask(rho_c, threshold)
    safe = np.where(mask, rho_c, 1.0)
    ex_p = np.einsum("abij,baij->ij", H.dp_values, rho).real
    ex_x = np.einsum("abij,baij->ij", H.dx_values, rho).real
    xdot = np.where(mask, ex_p / safe, 0.0)
    pdot = np.where(mask, -ex_x / safe, 0.0)
    return FlowField(ScalarField(state.grid, xdot), ScalarField(state.grid, pdot), mask)


def continuity_divergence(flow: FlowField, rho_c: ScalarField) -> ScalarField:
    """``-d/dx(rho_c xdot) - d/dp(rho_c pdot)`` with zero-exterior differences."""
    jx = ScalarField(rho_c.grid, rho_c.values * flow.xdot.values)
    jp = ScalarField(rho_c.grid, rho_c.values * flow.pdot.values)
    return ScalarField(rho_c.grid, -partial_x(jx, "zero").values - partial_p(jp, "zero").values)


# --- counterexample to positivity of the uncorrected dynamics -------------------------

@dataclass(frozen=True)
class PositivityProbe:
    """A product state ``|up_z><up_z| * Gaussian`` under ``H = lam * x * sigma_x``.

    ``coarse`` smooths the initial state with the Planck-cell kernel first.
    """

    variance: float
    lam: float
    coupling: str = "sigma_x"
    coarse: bool = False
    dt: float = 1e-3
    t_final: float = 1.0

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def coupling_matrix(self) -> np.ndarray:
        return {"sigma_x": SIGMA_X, "sigma_y": SIGMA_Y, "sigma_z": SIGMA_Z}[self.coupling]

    def hamiltonian(self, grid: PhaseGrid) -> HybridHamiltonian:
        return HybridHamiltonian.build(grid, h_int=linear_coupling(self.lam, self.coupling_matrix()))

    def initial_state(self, grid: PhaseGrid, rho_q=None) -> HybridState:
        rho_q = np.array([[1, 0], [0, 0]], complex) if rho_q is None else rho_q
        g = gaussian_distribution(grid, var_x=self.variance, var_p=self.variance)
        g = ClassicalDistribution(grid, g.values / integrate(g))
        st = product_state(rho_q, g)
        if self.coarse:
            smooth = coarse_grain(st.field)
            st = HybridState(MatrixField(grid, smooth.values / integrate(smooth.trace()), hermitian=True))
        return st

    def run(self, grid: PhaseGrid, generator: str, record_every: int = 10, stop_below: float | None = None):
        """Evolve and return ``(final_state, trace)``; optionally stop once ``min_eig < stop_below``."""
        H = self.hamiltonian(grid)
        st = self.initial_state(grid)
        if stop_below is None:
            return step(st, H, self.dt, self.n_steps, generator, record_every=record_every,
                        check_admissibility=False)
        full = PositivityTrace()
        done = 0
        while done < self.n_steps:
            chunk = min(record_every, self.n_steps - done)
            st, tr = step(st, H, self.dt, chunk, generator, record_every=chunk,
                          check_admissibility=False, t0=done * self.dt)
            if full.t:
                for name in ("t", "min_eig", "total_trace", "hermiticity"):
                    getattr(tr, name).pop(0)
            full.extend(tr)
            done += chunk
            if full.lowest < stop_below:
                break
        return st, full


def scan_naive_counterexamples(grid: PhaseGrid, variances=(0.05, 0.1, 0.25), lams=(1.0, 2.0, 5.0),
                               threshold: float = -1e-3):
    """Yield ``(probe, lowest_min_eig)`` for sharp product states under the naive generator.

    Scans the sharpest state first and, for each, the couplings in order. The
    first probe whose minimum cell eigenvalue drops below ``threshold`` within
    ``t <= 1`` is the documented counterexample.
    """
    for var in variances:
        for lam in lams:
            probe = PositivityProbe(variance=var, lam=lam)
            if probe.dt > max_stable_dt(probe.hamiltonian(grid)):
                continue
            _, tr = probe.run(grid, "naive", record_every=10, stop_below=threshold)
            yield probe, tr.lowest


NAIVE_COUNTEREXAMPLE = PositivityProbe(variance=0.05, lam=1.0)
