"""Indirect position measurement and the Gaussian hitting process.

The measurement chain couples the system coordinate ``q`` to a Gaussian pointer
(ancilla) of width ``delta``, shifts the pointer by ``q`` and then reads the
pointer sharply at ``qbar``. Its net effect on the system is a hit: multiply
``psi(q)`` by a Gaussian centred at ``qbar`` and renormalize, with ``qbar``
drawn from ``p(qbar) = N(qbar)^2``.

Both routes are implemented here so they can be checked against each other.
They agree to rounding when the system grid and the pointer grid are sub-grids
of one lattice ``h * Z`` (see :meth:`LineGrid.centered` and :func:`pointer_grid`),
because the interpolated pointer slice then lands exactly on stored samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import GridTooNarrow, InputError, InvalidState, ZeroProbabilityOutcome

NORM_TOL = 1e-10
ZERO_PROBABILITY = 1e-300


@dataclass(frozen=True)
class LineGrid:
    """Uniform cell-centred grid on ``[q_min, q_max]`` with ``n`` cells."""

    q_min: float
    q_max: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InputError(f"line grid needs an integer n >= 2, got {self.n!r}")
        if not self.q_max > self.q_min:
            raise InputError("line grid needs q_min < q_max")

    @classmethod
    def centered(cls, half_width: float, spacing: float) -> "LineGrid":
        """Symmetric grid whose cell centres are the lattice points ``k * spacing``, ``|k| <= half_width / spacing``."""
        k = int(math.floor(half_width / spacing + 1e-9))
        n = 2 * k + 1
        return cls(-(k + 0.5) * spacing, (k + 0.5) * spacing, n)

    @property
    def spacing(self) -> float:
        return (self.q_max - self.q_min) / self.n

    @property
    def points(self) -> np.ndarray:
        return self.q_min + (np.arange(self.n) + 0.5) * self.spacing

    def to_dict(self) -> dict:
        return {"q_min": self.q_min, "q_max": self.q_max, "n": self.n}


def pointer_grid(system: LineGrid, delta: float, margin: float = 8.0) -> LineGrid:
    """Pointer grid on the same lattice as ``system``, padded by ``margin * delta`` on both sides."""
    h = system.spacing
    pad = int(math.ceil(margin * delta / h))
    return LineGrid(system.q_min - pad * h, system.q_max + pad * h, system.n + 2 * pad)


@dataclass(frozen=True, eq=False)
class WaveFunction:
    grid: LineGrid
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (self.grid.n,):
            raise InputError(f"amplitudes shape {a.shape} does not match grid size {self.grid.n}")
        if not np.all(np.isfinite(a)):
            raise InvalidState("wave function has non-finite amplitudes")
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def from_function(cls, grid: LineGrid, func: Callable, normalize: bool = True) -> "WaveFunction":
        psi = cls(grid, func(grid.points))
        return psi.normalized() if normalize else psi

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.spacing)

    def normalized(self) -> "WaveFunction":
        n2 = self.norm2()
        if n2 <= 0:
            raise InvalidState("cannot normalize a zero wave function")
        return WaveFunction(self.grid, self.amplitudes / math.sqrt(n2))

    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def mean(self) -> float:
        return float(np.sum(self.grid.points * self.density()) * self.grid.spacing / self.norm2())

    def variance(self) -> float:
        m = self.mean()
        return float(np.sum((self.grid.points - m) ** 2 * self.density()) * self.grid.spacing / self.norm2())

    def mass_where(self, mask) -> float:
        return float(np.sum(self.density()[mask]) * self.grid.spacing)


def _require_normalized(psi: WaveFunction, what: str = "wave function") -> None:
    n2 = psi.norm2()
    if abs(n2 - 1.0) > 1e-8:
        raise InvalidState(f"{what} must be normalized, has norm^2 {n2!r}")


def l2_distance(a: WaveFunction, b: WaveFunction) -> float:
    if a.grid != b.grid:
        raise InputError("wave functions live on different grids")
    return float(np.sqrt(np.sum(np.abs(a.amplitudes - b.amplitudes) ** 2) * a.grid.spacing))


@dataclass(frozen=True, eq=False)
class CompositeWaveFunction:
    """Joint amplitudes ``Phi[q, x_A]`` of system and pointer."""

    system: LineGrid
    pointer: LineGrid
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (self.system.n, self.pointer.n):
            raise InputError(f"composite amplitudes must have shape {(self.system.n, self.pointer.n)}")
        object.__setattr__(self, "amplitudes", a)

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.system.spacing * self.pointer.spacing)


@dataclass(frozen=True)
class HitParams:
    """Pointer precision ``delta`` and read-out value ``qbar``."""

    delta: float
    qbar: float

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise InputError(f"delta must be positive, got {self.delta!r}")
        if not math.isfinite(self.qbar):
            raise InputError("qbar must be finite")

    def check_range(self, grid: LineGrid) -> None:
        lo, hi = grid.q_min - 4 * self.delta, grid.q_max + 4 * self.delta
        if not lo <= self.qbar <= hi:
            raise InputError(f"qbar = {self.qbar} outside [{lo:g}, {hi:g}]")


@dataclass(frozen=True, eq=False)
class OutcomeSample:
    qbar: float
    post_state: WaveFunction
    pdf_value: float


def _gaussian_amplitude(x, delta):
    return (2 * math.pi * delta * delta) ** -0.25 * np.exp(-(x * x) / (4 * delta * delta))


def ancilla_state(delta: float, grid: LineGrid) -> WaveFunction:
    """Pointer wave function ``(2 pi delta^2)^(-1/4) exp(-x^2 / 4 delta^2)``, renormalized on the grid."""
    if not delta > 0:
        raise InputError(f"delta must be positive, got {delta!r}")
    if grid.q_min > -6 * delta or grid.q_max < 6 * delta:
        raise GridTooNarrow(f"pointer grid [{grid.q_min:g}, {grid.q_max:g}] must span +-6 delta = +-{6 * delta:g}")
    return WaveFunction(grid, _gaussian_amplitude(grid.points, delta)).normalized()


def _interp_complex(x, xp, fp):
    return np.interp(x, xp, fp.real, left=0.0, right=0.0) + 1j * np.interp(x, xp, fp.imag, left=0.0, right=0.0)


def entangle(psi: WaveFunction, psi_a: WaveFunction) -> CompositeWaveFunction:
    """``Phi[q, x_A] = psi_A(x_A - q) psi(q)``, pointer amplitude linearly interpolated."""
    _require_normalized(psi)
    _require_normalized(psi_a, "pointer state")
    q = psi.grid.points
    xa = psi_a.grid.points
    shifted = xa[None, :] - q[:, None]
    amp = _interp_complex(shifted.ravel(), xa, psi_a.amplitudes).reshape(shifted.shape)
    phi = CompositeWaveFunction(psi.grid, psi_a.grid, amp * psi.amplitudes[:, None])
    n2 = phi.norm2()
    if n2 <= 0:
        raise InvalidState("pointer grid does not overlap the shifted system support")
    return CompositeWaveFunction(phi.system, phi.pointer, phi.amplitudes / math.sqrt(n2))


def project_pointer(phi: CompositeWaveFunction, qbar: float):
    """Read the pointer sharply at ``qbar``.

    Returns
    -------
    (WaveFunction, float)
        The normalized system state and ``N(qbar)``, whose square is the
        outcome density.
    """
    xa = phi.pointer.points
    h = phi.pointer.spacing
    if not xa[0] - 1e-12 * h <= qbar <= xa[-1] + 1e-12 * h:
        raise ZeroProbabilityOutcome(f"qbar = {qbar} lies outside the pointer grid")
    pos = (qbar - xa[0]) / h
    j = min(int(math.floor(pos)), phi.pointer.n - 2)
    w = pos - j
    if abs(w) < 1e-9:
        slice_ = phi.amplitudes[:, j]
    elif abs(w - 1) < 1e-9:
        slice_ = phi.amplitudes[:, j + 1]
    else:
        slice_ = (1 - w) * phi.amplitudes[:, j] + w * phi.amplitudes[:, j + 1]
    n2 = float(np.sum(np.abs(slice_) ** 2) * phi.system.spacing)
    if n2 < ZERO_PROBABILITY:
        raise ZeroProbabilityOutcome(f"outcome qbar = {qbar} has probability density {n2:.3e}")
    return WaveFunction(phi.system, slice_ / math.sqrt(n2)), math.sqrt(n2)


def hit(psi: WaveFunction, params: HitParams):
    """Multiply by the Gaussian pointer profile centred at ``qbar`` and renormalize.

    Returns
    -------
    (WaveFunction, float)
        Post-hit state and the pre-normalization squared norm ``N(qbar)^2``.
    """
    _require_normalized(psi)
    params.check_range(psi.grid)
    out = psi.amplitudes * _gaussian_amplitude(params.qbar - psi.grid.points, params.delta)
    n2 = float(np.sum(np.abs(out) ** 2) * psi.grid.spacing)
    if n2 < ZERO_PROBABILITY:
        raise ZeroProbabilityOutcome(f"outcome qbar = {params.qbar} has probability density {n2:.3e}")
    return WaveFunction(psi.grid, out / math.sqrt(n2)), n2


@dataclass(frozen=True, eq=False)
class OutcomeDensity:
    """``p(qbar)`` sampled on a lattice of outcome values."""

    qbar: np.ndarray
    values: np.ndarray
    spacing: float

    def integral(self) -> float:
        return float(np.sum(self.values) * self.spacing)

    def mass_above(self, threshold: float = 0.0) -> float:
        return float(np.sum(self.values[self.qbar > threshold]) * self.spacing)

    def mean(self) -> float:
        return float(np.sum(self.qbar * self.values) * self.spacing / self.integral())

    def cdf(self) -> np.ndarray:
        """Cumulative trapezoid rule, scaled to end at exactly 1."""
        c = np.concatenate([[0.0], np.cumsum(0.5 * (self.values[1:] + self.values[:-1]) * self.spacing)])
        return c / c[-1]


def outcome_pdf(psi: WaveFunction, delta: float) -> OutcomeDensity:
    """``p(qbar) = sum_q |psi(q)|^2 G_delta(qbar - q) dq`` on the system lattice padded by ``8 delta``.

    ``G_delta`` is the normal density with variance ``delta^2`` (the squared
    pointer profile), so the result integrates to one.
    """
    if not delta > 0:
        raise InputError(f"delta must be positive, got {delta!r}")
    _require_normalized(psi)
    h = psi.grid.spacing
    pad = int(math.ceil(8 * delta / h))
    offsets = np.arange(-pad, pad + 1) * h
    kernel = np.exp(-(offsets ** 2) / (2 * delta * delta)) / math.sqrt(2 * math.pi * delta * delta)
    values = np.convolve(psi.density(), kernel) * h
    qbar = psi.grid.points[0] + (np.arange(values.size) - pad) * h
    return OutcomeDensity(qbar, values, h)


def _inverse_cdf(density: OutcomeDensity, u: np.ndarray) -> np.ndarray:
    """Invert the piecewise-linear CDF; flat stretches (zero density) are skipped."""
    cdf = density.cdf()
    u = np.asarray(u, dtype=float)
    k = np.searchsorted(cdf, u, side="right")
    k = np.clip(k, 1, cdf.size - 1)
    lo, hi = cdf[k - 1], cdf[k]
    width = hi - lo
    frac = np.where(width > 0, (u - lo) / np.where(width > 0, width, 1.0), 0.0)
    return density.qbar[k - 1] + np.clip(frac, 0.0, 1.0) * density.spacing


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_outcome(psi: WaveFunction, delta: float, rng_seed) -> OutcomeSample:
    """Draw ``qbar`` from ``p(qbar)`` by inverse CDF and apply the hit.

    ``rng_seed`` is an integer seed or a ``numpy.random.Generator``; one
    uniform variate is consumed.
    """
    density = outcome_pdf(psi, delta)
    qbar = float(_inverse_cdf(density, _rng(rng_seed).random())[()])
    post, n2 = hit(psi, HitParams(delta, qbar))
    return OutcomeSample(qbar, post, n2)


def ensemble_uniforms(seed: int, n_runs: int) -> np.ndarray:
    """One uniform variate per run, run ``i`` drawing from ``default_rng(seed + i)``."""
    return np.array([np.random.default_rng(seed + i).random() for i in range(n_runs)])


@dataclass(frozen=True, eq=False)
class Ensemble:
    seed: int
    delta: float
    qbar: np.ndarray
    weight: np.ndarray

    @property
    def n_runs(self) -> int:
        return int(self.qbar.size)

    def branch_frequencies(self, threshold: float = 0.0) -> dict:
        above = float(np.mean(self.qbar > threshold)) if self.n_runs else float("nan")
        return {"plus": above, "minus": 1.0 - above if self.n_runs else float("nan")}

    def summary(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "seed": self.seed,
            "delta": self.delta,
            "branch_frequencies": self.branch_frequencies(),
        }

    def to_csv(self, path) -> None:
        rows = np.column_stack([np.arange(self.n_runs), self.qbar, self.weight])
        with open(path, "w", newline="\n") as fh:
            fh.write("run,qbar,weight\n")
            for i, q, w in rows:
                fh.write(f"{int(i)},{q:.17g},{w:.17g}\n")


def sample_outcomes(psi: WaveFunction, delta: float, seed: int, n_runs: int, chunk: int = 2048) -> Ensemble:
    """``n_runs`` independent single-hit outcomes; run ``i`` matches ``sample_outcome(psi, delta, seed + i)``."""
    if n_runs < 0:
        raise InputError("n_runs must be non-negative")
    density = outcome_pdf(psi, delta)
    qbar = _inverse_cdf(density, ensemble_uniforms(seed, n_runs))
    prob = psi.density()
    q = psi.grid.points
    weight = np.empty(n_runs)
    for s in range(0, n_runs, chunk):
        d = qbar[s:s + chunk, None] - q[None, :]
        g2 = np.abs(_gaussian_amplitude(d, delta)) ** 2
        weight[s:s + chunk] = (g2 * prob[None, :]).sum(axis=1) * psi.grid.spacing
    return Ensemble(int(seed), float(delta), qbar, weight)


def repeated_hits(psi: WaveFunction, delta: float, n_hits: int, seed):
    """Apply ``n_hits`` sampled hits in sequence from one generator.

    Returns the final state and the list of outcomes.
    """
    rng = _rng(seed)
    outcomes = []
    for _ in range(n_hits):
        s = sample_outcome(psi, delta, rng)
        psi = s.post_state
        outcomes.append(s.qbar)
    return psi, outcomes


def gaussian_packet(grid: LineGrid, center: float, width: float) -> WaveFunction:
    """Normalized real Gaussian amplitude with ``|psi|^2`` of variance ``width^2``."""
    return WaveFunction(grid, _gaussian_amplitude(grid.points - center, width)).normalized()


def two_peak_state(grid: LineGrid, weight_plus: float, separation: float, width: float, phase: float = 0.0) -> WaveFunction:
    """``c_+ G(q - a) + c_- G(q + a)`` with ``|c_+|^2 = weight_plus`` and ``a = separation / 2``."""
    if not 0.0 <= weight_plus <= 1.0:
        raise InputError("weight_plus must lie in [0, 1]")
    a = 0.5 * separation
    cp = math.sqrt(weight_plus) * complex(math.cos(phase), math.sin(phase))
    cm = math.sqrt(1.0 - weight_plus)
    x = grid.points
    amp = cp * _gaussian_amplitude(x - a, width) + cm * _gaussian_amplitude(x + a, width)
    return WaveFunction(grid, amp).normalized()
