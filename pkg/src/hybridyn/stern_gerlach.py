"""Spin measured by a classical pointer through an impulsive coupling ``g p sigma_z``.

The impulse is never time-sliced. On the spin matrix element ``(a, b)`` (with
``a, b = +1, -1``; array index 0 is ``+``) it acts as the first-order operator
``-i g p (a - b) - (g/2)(a + b) d/dx - (i g/2)(a - b) d/dp``, whose exponential is

    rho_ab -> c_a c_b^* exp(-(a - b)^2 g^2 / 4 - i (a - b) g p)
              * rho_C(x - (a + b) g / 2, p - i (a - b) g / 2).

Diagonal elements are rigid shifts in ``x``. Off-diagonal elements need the
classical density at a complex momentum. :func:`analytic_propagate` evaluates
that by analytic continuation of a Gaussian. :func:`numeric_propagate` does it
in the Fourier domain along ``p``, where the imaginary shift becomes the real
multiplier ``exp(gamma k)``. That multiplier is unbounded, so it is guarded.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import GridTooNarrow, InputError, InvalidState, OffDiagonalUnstable, UnsupportedClassicalState
from .hybrid import HybridState, classical_marginal
from .phase_space import MatrixField, PhaseGrid, integrate

SIGNS = (1, -1)
KEEP_MODES = 1e-15
GUARD_MODES = 1e-12
MAX_MULTIPLIER = 1e12


class WeakCouplingWarning(UserWarning):
    """Pointer precision ``1/g`` is not small; the branches overlap."""


@dataclass(frozen=True)
class SpinAmplitudes:
    c_plus: complex = 1 / math.sqrt(2)
    c_minus: complex = 1 / math.sqrt(2)

    def __post_init__(self):
        cp, cm = complex(self.c_plus), complex(self.c_minus)
        norm = abs(cp) ** 2 + abs(cm) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise InvalidState(f"|c_+|^2 + |c_-|^2 = {norm!r}, expected 1")
        object.__setattr__(self, "c_plus", cp)
        object.__setattr__(self, "c_minus", cm)

    @classmethod
    def from_weight(cls, weight_plus: float, phase: float = 0.0) -> "SpinAmplitudes":
        """``c_+ = sqrt(w) e^{i phase}``, ``c_- = sqrt(1 - w)``."""
        if not 0.0 <= weight_plus <= 1.0:
            raise InvalidState("weight_plus must lie in [0, 1]")
        return cls(math.sqrt(weight_plus) * cmath.exp(1j * phase), math.sqrt(1.0 - weight_plus))

    @classmethod
    def random(cls, rng) -> "SpinAmplitudes":
        """Uniform on the Bloch sphere."""
        z = rng.normal(size=2) + 1j * rng.normal(size=2)
        z = z / np.linalg.norm(z)
        return cls(complex(z[0]), complex(z[1]))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.c_plus, self.c_minus])

    def density_matrix(self) -> np.ndarray:
        v = self.vector
        return np.outer(v, v.conj())

    @property
    def weights(self) -> tuple[float, float]:
        return abs(self.c_plus) ** 2, abs(self.c_minus) ** 2


@dataclass(frozen=True)
class GaussianDensity:
    """Normal density in ``(x, p)``; evaluates at complex ``p`` by analytic continuation."""

    x0: float = 0.0
    p0: float = 0.0
    var_x: float = 1.0
    var_p: float = 1.0

    def __post_init__(self):
        if not (self.var_x > 0 and self.var_p > 0):
            raise InputError("Gaussian variances must be positive")

    def __call__(self, x, p):
        norm = 1.0 / (2 * math.pi * math.sqrt(self.var_x * self.var_p))
        return norm * np.exp(-((x - self.x0) ** 2) / (2 * self.var_x) - (p - self.p0) ** 2 / (2 * self.var_p))


@dataclass(frozen=True)
class SGParams:
    """Coupling strength and spin state. ``delta = 1/g`` is the read-out precision."""

    g: float = 3.0
    spin: SpinAmplitudes = field(default_factory=SpinAmplitudes)
    rho_c: GaussianDensity = field(default_factory=GaussianDensity)

    def __post_init__(self):
        if not (self.g > 0 and math.isfinite(self.g)):
            raise InputError(f"g must be positive, got {self.g!r}")
        if self.g < 3:
            warnings.warn(f"g = {self.g} gives precision 1/g = {1 / self.g:.3g}; branches will overlap",
                          WeakCouplingWarning, stacklevel=2)

    @property
    def delta(self) -> float:
        return 1.0 / self.g


def _require_box(grid: PhaseGrid) -> None:
    if not grid.contains_box(-8.0, 8.0, -8.0, 8.0):
        raise GridTooNarrow("grid must contain [-8, 8] x [-8, 8]")


def _finish(grid: PhaseGrid, values: np.ndarray) -> HybridState:
    # mass pushed past the box edge is lost by every branch in the same proportion;
    # rescaling the total restores unit trace without biasing branch weights
    total = float(np.einsum("aaij->", values).real * grid.cell_area)
    return HybridState(MatrixField(grid, values / total, hermitian=True))


def initial_state(spin: SpinAmplitudes, grid: PhaseGrid, rho_c: GaussianDensity | None = None) -> HybridState:
    """``|in><in| * rho_C(x, p)`` with the standard normal ``rho_C`` by default."""
    _require_box(grid)
    rho_c = rho_c or GaussianDensity()
    X, P = grid.mesh()
    return _finish(grid, spin.density_matrix()[:, :, None, None] * rho_c(X, P)[None, None])


def _element_prefactor(a: int, b: int, g: float, P: np.ndarray) -> np.ndarray:
    d = a - b
    return np.exp(-(d * d) * g * g / 4.0 - 1j * d * g * P)


def analytic_propagate(spin: SpinAmplitudes, g: float, grid: PhaseGrid,
                       rho_c: GaussianDensity | None = None) -> HybridState:
    """Closed-form impulse applied to ``|in><in| * rho_C`` for a Gaussian ``rho_C``."""
    rho_c = GaussianDensity() if rho_c is None else rho_c
    if not isinstance(rho_c, GaussianDensity):
        raise UnsupportedClassicalState(
            "closed-form propagation needs the classical state as a GaussianDensity; "
            "use numeric_propagate for sampled fields"
        )
    if not g >= 0:
        raise InputError(f"g must be non-negative, got {g!r}")
    _require_box(grid)
    X, P = grid.mesh()
    c = spin.vector
    out = np.empty((2, 2) + grid.shape, dtype=complex)
    for i, a in enumerate(SIGNS):
        for j, b in enumerate(SIGNS):
            if j < i:
                continue
            shifted = rho_c(X - 0.5 * (a + b) * g, P - 0.5j * (a - b) * g)
            out[i, j] = c[i] * np.conj(c[j]) * _element_prefactor(a, b, g, P) * shifted
    out[0, 0] = out[0, 0].real
    out[1, 1] = out[1, 1].real
    out[1, 0] = np.conj(out[0, 1])
    return _finish(grid, out)


def diagonal_final_state(spin: SpinAmplitudes, g: float, grid: PhaseGrid,
                         rho_c: GaussianDensity | None = None) -> HybridState:
    """``sum_a |c_a|^2 |a><a| rho_C(x - a g, p)``: the propagated state without its off-diagonals."""
    rho_c = rho_c or GaussianDensity()
    _require_box(grid)
    X, P = grid.mesh()
    out = np.zeros((2, 2) + grid.shape, dtype=complex)
    for i, a in enumerate(SIGNS):
        out[i, i] = spin.weights[i] * rho_c(X - a * g, P)
    return _finish(grid, out)


def damping_factor(g: float) -> float:
    """Suppression ``exp(-g^2)`` of the integrated off-diagonal element."""
    return math.exp(-g * g)


def shift_x(f: np.ndarray, shift: float, h: float) -> np.ndarray:
    """Translate ``f(x) -> f(x - shift)`` along the first cell axis.

    Uses a Fourier phase on a zero-padded copy, so content leaving the box is
    dropped instead of wrapping around. Integer-cell shifts are exact up to
    rounding; fractional shifts are band-limited interpolation.
    """
    ax = f.ndim - 2
    n = f.shape[ax]
    m = 2 * n
    k = 2 * np.pi * np.fft.fftfreq(m, d=h)
    shape = [1] * f.ndim
    shape[ax] = m
    F = np.fft.fft(f, n=m, axis=ax)
    out = np.fft.ifft(F * np.exp(-1j * k * shift).reshape(shape), axis=ax)
    return np.take(out, np.arange(n), axis=ax)


def imaginary_p_shift(f: np.ndarray, gamma: float, h: float, floor: float = KEEP_MODES):
    """``exp(-gamma^2) f(p - i gamma)`` along the last axis via the multiplier ``exp(-gamma^2 + gamma k)``.

    Parameters
    ----------
    f
        Samples, transformed along the last axis.
    floor
        Relative noise level of ``f``'s transform. Modes at or below it carry no
        information and are discarded before amplification.

    Returns
    -------
    (ndarray, float)
        The shifted samples and the noise floor of the result, i.e. the input
        floor times the largest multiplier actually applied.

    Raises
    ------
    OffDiagonalUnstable
        If a mode above ``1e-12`` of the peak (or above the floor, whichever is
        larger) would be amplified by more than ``1e12``.
    """
    n = f.shape[-1]
    k = 2 * np.pi * np.fft.fftfreq(n, d=h)
    F = np.fft.fft(f, axis=-1)
    mag = np.abs(F)
    top = mag.max()
    if top == 0:
        return np.zeros_like(f, dtype=complex), floor
    mult = np.broadcast_to(np.exp(-gamma * gamma + gamma * k), F.shape)
    guarded = mag > max(GUARD_MODES, floor) * top
    worst = float(np.max(np.where(guarded, mult, 0.0)))
    if worst > MAX_MULTIPLIER:
        raise OffDiagonalUnstable(
            f"imaginary momentum shift {gamma:g} amplifies retained modes by {worst:.3e} (> {MAX_MULTIPLIER:.0e})"
        )
    keep = mag > floor * top
    G = np.where(keep, F * mult, 0.0)
    top_out = np.abs(G).max()
    gain = float(np.max(np.where(keep, mult, 0.0)))
    new_floor = floor * top * gain / top_out if top_out > 0 else floor
    return np.fft.ifft(G, axis=-1), max(new_floor, KEEP_MODES)


def _check_margin(state: HybridState, g: float) -> None:
    rho_c = classical_marginal(state).values
    grid = state.grid
    w = rho_c.sum(axis=1)
    total = w.sum()
    mean = float(np.sum(grid.x * w) / total)
    sd = float(np.sqrt(max(np.sum((grid.x - mean) ** 2 * w) / total, 0.0)))
    if mean - g - 3 * sd < grid.x_min or mean + g + 3 * sd > grid.x_max:
        raise GridTooNarrow(
            f"shifting by g = {g:g} leaves less than 3 sigma ({3 * sd:.3g}) inside [{grid.x_min:g}, {grid.x_max:g}]"
        )


def numeric_propagate(state: HybridState, g: float, n_substeps: int = 1) -> HybridState:
    """Apply the impulse to an arbitrary sampled spin-1/2 hybrid state.

    The impulse is split into ``n_substeps`` equal impulses of strength
    ``g / n_substeps`` applied in sequence. In exact arithmetic the result is
    independent of the split.
    """
    if state.dim != 2:
        raise InputError("the Stern-Gerlach impulse acts on spin-1/2 states (d = 2)")
    if not g >= 0:
        raise InputError(f"g must be non-negative, got {g!r}")
    if int(n_substeps) != n_substeps or n_substeps < 1:
        raise InputError("n_substeps must be a positive integer")
    _check_margin(state, g)
    grid = state.grid
    X, P = grid.mesh()
    gs = g / n_substeps
    rho = state.values.copy()
    floor = KEEP_MODES
    for _ in range(int(n_substeps)):
        new = np.empty_like(rho)
        for i, a in enumerate(SIGNS):
            new[i, i] = shift_x(rho[i, i], a * gs, grid.dx)
        a, b = SIGNS
        el = rho[0, 1]
        if (a + b) != 0:
            el = shift_x(el, 0.5 * (a + b) * gs, grid.dx)
        el, floor = imaginary_p_shift(el, 0.5 * (a - b) * gs, grid.dp, floor)
        new[0, 1] = np.exp(-1j * (a - b) * gs * P) * el
        new[1, 0] = np.conj(new[0, 1])
        rho = new
    rho[0, 0] = rho[0, 0].real
    rho[1, 1] = rho[1, 1].real
    return _finish(grid, rho)


@dataclass(frozen=True)
class Readout:
    """Branch statistics of a final state.

    ``offdiag_norm`` is ``|integral of rho_+-|``; ``offdiag_l1`` is the integral
    of ``|rho_+-|``.
    """

    p_plus: float
    p_minus: float
    pointer_mean_plus: float
    pointer_mean_minus: float
    offdiag_norm: float
    offdiag_l1: float

    def to_dict(self) -> dict:
        return {
            "p_plus": self.p_plus,
            "p_minus": self.p_minus,
            "pointer_means": [self.pointer_mean_plus, self.pointer_mean_minus],
            "offdiag_norm": self.offdiag_norm,
            "offdiag_l1": self.offdiag_l1,
        }


def readout(final: HybridState, g: float) -> Readout:
    """Split the pointer distribution at ``x = 0`` and read ``x / g`` in each half."""
    if not g > 0:
        raise InputError(f"g must be positive, got {g!r}")
    grid = final.grid
    rho_c = classical_marginal(final).values
    col = rho_c.sum(axis=1) * grid.cell_area
    x = grid.x
    w_plus = np.where(x > 0, 1.0, np.where(x == 0, 0.5, 0.0))
    w_minus = 1.0 - w_plus
    total = col.sum()
    m_plus = float(np.sum(col * w_plus))
    m_minus = float(np.sum(col * w_minus))
    mean_plus = float(np.sum(col * w_plus * x) / (g * m_plus)) if m_plus > 0 else float("nan")
    mean_minus = float(np.sum(col * w_minus * x) / (g * m_minus)) if m_minus > 0 else float("nan")
    off = final.values[0, 1]
    return Readout(
        p_plus=m_plus / total,
        p_minus=m_minus / total,
        pointer_mean_plus=mean_plus,
        pointer_mean_minus=mean_minus,
        offdiag_norm=float(abs(off.sum() * grid.cell_area)),
        offdiag_l1=float(np.abs(off).sum() * grid.cell_area),
    )


def offdiag_ratio(final: HybridState, initial: HybridState) -> float:
    """``|integral rho_+-|`` after over before."""
    before = abs(integrate(initial.field)[0, 1])
    after = abs(integrate(final.field)[0, 1])
    return after / before if before > 0 else float("nan")
