import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridyn import hybrid
from hybridyn import stern_gerlach as sg
from hybridyn.errors import (
    GridTooNarrow,
    InputError,
    InvalidState,
    OffDiagonalUnstable,
    UnsupportedClassicalState,
)
from hybridyn.phase_space import PhaseGrid

from . import oracles

SPIN = sg.SpinAmplitudes.from_weight(0.7, phase=0.3)


def _l1(a, b, grid):
    return float(np.sum(np.abs(a.values - b.values)) * grid.cell_area)


def test_spin_amplitudes():
    with pytest.raises(InvalidState):
        sg.SpinAmplitudes(1.0, 1.0)
    with pytest.raises(InvalidState):
        sg.SpinAmplitudes.from_weight(1.2)
    s = sg.SpinAmplitudes.random(np.random.default_rng(1))
    assert sum(s.weights) == pytest.approx(1.0, abs=1e-12)
    rho = SPIN.density_matrix()
    assert np.trace(rho).real == pytest.approx(1.0)
    assert rho[0, 0].real == pytest.approx(0.7)


def test_params_and_inputs(grid):
    with pytest.warns(sg.WeakCouplingWarning):
        sg.SGParams(g=1.0)
    with pytest.raises(InputError):
        sg.SGParams(g=0.0)
    assert sg.SGParams(g=4.0).delta == 0.25
    with pytest.raises(InputError):
        sg.GaussianDensity(var_x=0.0)
    with pytest.raises(UnsupportedClassicalState):
        sg.analytic_propagate(SPIN, 3.0, grid, rho_c=lambda x, p: x)
    with pytest.raises(GridTooNarrow):
        sg.initial_state(SPIN, PhaseGrid(-4, 4, -4, 4, 64, 64))


def test_initial_state(grid):
    s = sg.initial_state(SPIN, grid)
    assert s.total_trace() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(hybrid.quantum_marginal(s), SPIN.density_matrix(), atol=1e-12)


def test_analytic_diagonals_are_shifted_copies(grid):
    a = sg.analytic_propagate(SPIN, 3.0, grid)
    d = sg.diagonal_final_state(SPIN, 3.0, grid)
    assert np.max(np.abs(a.values[0, 0] - d.values[0, 0])) < 1e-15
    assert np.max(np.abs(a.values[1, 1] - d.values[1, 1])) < 1e-15
    assert np.all(d.values[0, 1] == 0)


def test_analytic_offdiagonal_integral_is_damped(grid):
    for g in (0.5, 1.0, 2.0, 3.0, 4.0):
        init = sg.initial_state(SPIN, grid)
        fin = sg.analytic_propagate(SPIN, g, grid)
        assert sg.offdiag_ratio(fin, init) == pytest.approx(oracles.offdiag_ratio_after_impulse(0.7, g), rel=1e-10)
        assert sg.offdiag_ratio(fin, init) == pytest.approx(math.exp(-g * g), abs=1e-10)
    assert sg.damping_factor(2.0) == math.exp(-4.0)


@pytest.mark.parametrize("g", [3.0, 4.0, 5.0])
def test_readout_matches_truncated_normal_oracle(grid, g):
    w = 0.7
    r = sg.readout(sg.analytic_propagate(SPIN, g, grid), g)
    assert r.p_plus == pytest.approx(oracles.midpoint_branch_probability_plus(w, g, grid.dx), abs=1e-12)
    # against the continuum the cell sums carry an O(h^2) error from the kink at x = 0
    assert r.p_plus == pytest.approx(oracles.branch_probability_plus(w, g), abs=1e-5)
    assert r.p_plus + r.p_minus == pytest.approx(1.0, abs=1e-14)
    m_pp = w * oracles.normal_mass(g, 1, 0, 8)
    m_mp = (1 - w) * oracles.normal_mass(-g, 1, 0, 8)
    mean = (m_pp * oracles.half_normal_mean(g, 0, 8) + m_mp * oracles.half_normal_mean(-g, 0, 8)) / (m_pp + m_mp)
    assert r.pointer_mean_plus == pytest.approx(mean / g, abs=1e-5)


def test_readout_rejects_bad_g(grid):
    with pytest.raises(InputError):
        sg.readout(sg.initial_state(SPIN, grid), 0.0)


def test_shift_x_integer_and_fractional(grid):
    X, P = grid.mesh()
    f = np.exp(-X**2 - P**2)
    out = sg.shift_x(f, 8 * grid.dx, grid.dx)
    assert np.max(np.abs(out - np.exp(-((X - 1.0) ** 2) - P**2))) < 1e-13
    out = sg.shift_x(f, 0.3, grid.dx)
    assert np.max(np.abs(out - np.exp(-((X - 0.3) ** 2) - P**2))) < 1e-12
    step = np.where(X > 6, 1.0, 0.0)
    moved = sg.shift_x(step, 4.0, grid.dx).real
    assert np.max(np.abs(moved[X < 0])) < 1e-12  # nothing wraps around the box


def test_imaginary_p_shift_matches_continuation(grid):
    X, P = grid.mesh()
    f = np.exp(-P**2 / 2)
    gamma = 2.0
    out, floor = sg.imaginary_p_shift(f, gamma, grid.dp)
    expected = math.exp(-gamma * gamma) * np.exp(-((P - 1j * gamma) ** 2) / 2)
    # modes below 1e-15 of the peak are dropped before amplification, which costs about 1e-10 here
    assert np.max(np.abs(out - expected)) < 1e-9
    assert floor >= sg.KEEP_MODES


def test_imaginary_p_shift_guard(small_grid, rng):
    noise = rng.normal(size=small_grid.shape)
    with pytest.raises(OffDiagonalUnstable):
        sg.imaginary_p_shift(noise, 8.0, small_grid.dp)
    out, _ = sg.imaginary_p_shift(np.zeros(small_grid.shape), 8.0, small_grid.dp)
    assert not np.any(out)


@pytest.mark.parametrize("g", [3.0, 4.0, 5.0])
def test_numeric_matches_analytic(grid, g):
    init = sg.initial_state(SPIN, grid)
    num = sg.numeric_propagate(init, g)
    ana = sg.analytic_propagate(SPIN, g, grid)
    assert _l1(num, ana, grid) < 1e-6
    assert sg.offdiag_ratio(num, init) == pytest.approx(math.exp(-g * g), abs=1e-6)


def test_numeric_substeps_agree(grid):
    init = sg.initial_state(SPIN, grid)
    one = sg.numeric_propagate(init, 3.0, 1)
    three = sg.numeric_propagate(init, 3.0, 3)
    assert _l1(one, three, grid) < 1e-6


def test_numeric_input_checks(grid):
    init = sg.initial_state(SPIN, grid)
    with pytest.raises(InputError):
        sg.numeric_propagate(init, -1.0)
    with pytest.raises(InputError):
        sg.numeric_propagate(init, 3.0, 0)
    with pytest.raises(GridTooNarrow):
        sg.numeric_propagate(init, 6.0)
    d1 = hybrid.HybridState.from_values(grid, init.values[:1, :1] / init.values[0, 0].real.sum() / grid.cell_area)
    with pytest.raises(InputError):
        sg.numeric_propagate(d1, 3.0)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(3.0, 4.5))
def test_numeric_keeps_spin_weights(seed, g):
    grid = PhaseGrid()
    spin = sg.SpinAmplitudes.random(np.random.default_rng(seed))
    fin = sg.numeric_propagate(sg.initial_state(spin, grid), g)
    q = hybrid.quantum_marginal(fin)
    assert q[0, 0].real == pytest.approx(spin.weights[0], abs=1e-10)
    assert fin.total_trace() == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(fin.values - np.conj(np.swapaxes(fin.values, 0, 1)))) == 0.0


def test_initial_pointer_moments(grid):
    rho_c = hybrid.classical_marginal(sg.initial_state(SPIN, grid))
    X, P = grid.mesh()
    w = rho_c.values * grid.cell_area
    assert np.sum(w * X) == pytest.approx(0.0, abs=1e-12)
    assert np.sum(w * X * X) == pytest.approx(1.0, abs=1e-6)
    assert np.sum(w * P * P) == pytest.approx(1.0, abs=1e-6)
    up = sg.initial_state(sg.SpinAmplitudes(1.0, 0.0), grid)
    assert np.allclose(hybrid.quantum_marginal(up), np.diag([1.0, 0.0]), atol=1e-12)


def test_zero_coupling_is_identity(grid):
    init = sg.initial_state(SPIN, grid)
    assert np.max(np.abs(sg.analytic_propagate(SPIN, 0.0, grid).values - init.values)) < 1e-12
    assert np.max(np.abs(sg.numeric_propagate(init, 0.0).values - init.values)) < 1e-12


def test_definite_spin_is_only_shifted(grid):
    up = sg.SpinAmplitudes(1.0, 0.0)
    fin = sg.numeric_propagate(sg.initial_state(up, grid), 3.0)
    assert not np.any(fin.values[0, 1]) and not np.any(fin.values[1, 1])
    X, P = grid.mesh()
    expected = sg.GaussianDensity()(X - 3.0, P)
    assert np.max(np.abs(fin.values[0, 0] - expected / (expected.sum() * grid.cell_area))) < 1e-12


@pytest.mark.parametrize("g", [3.0, 4.0, 5.0])
def test_final_quantum_marginal_is_diagonal(grid, g):
    fin = sg.analytic_propagate(SPIN, g, grid)
    q = hybrid.quantum_marginal(fin)
    assert q[0, 0].real == pytest.approx(0.7, abs=1e-8)
    assert abs(q[0, 1]) == pytest.approx(oracles.offdiag_ratio_after_impulse(0.7, g) * math.sqrt(0.21), rel=1e-9)


def test_conditional_states_follow_the_pointer(grid):
    g = 3.0
    fin = sg.analytic_propagate(SPIN, g, grid)
    for i in np.nonzero(np.abs(grid.x) > g / 2)[0][::5]:
        plus, minus, off = oracles.conditional_after_impulse(0.7, g, grid.x[i])
        cond = hybrid.conditional_state(fin, (i, 64))
        assert cond[0, 0].real == pytest.approx(plus, rel=1e-9, abs=1e-14)
        assert cond[1, 1].real == pytest.approx(minus, rel=1e-9, abs=1e-14)
        assert abs(cond[0, 1]) == pytest.approx(off, rel=1e-9, abs=1e-14)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 2 * math.pi), st.floats(0.05, 0.95))
def test_readout_ignores_spin_phase(phase, w):
    grid = PhaseGrid()
    a = sg.readout(sg.analytic_propagate(sg.SpinAmplitudes.from_weight(w), 3.0, grid), 3.0)
    b = sg.readout(sg.analytic_propagate(sg.SpinAmplitudes.from_weight(w, phase), 3.0, grid), 3.0)
    for k, v in a.to_dict().items():
        assert np.allclose(v, b.to_dict()[k], atol=1e-12, rtol=0)
