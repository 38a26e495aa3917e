import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridyn import collapse
from hybridyn.collapse import HitParams, LineGrid, WaveFunction
from hybridyn.errors import GridTooNarrow, InputError, InvalidState, ZeroProbabilityOutcome
from hybridyn.scenarios import hit_equivalence_distances, random_superposition

from . import oracles

GRID = LineGrid.centered(4.0, 0.01)


def test_centered_grid_is_a_lattice():
    g = LineGrid.centered(4.0, 0.01)
    assert g.n == 801
    assert g.spacing == pytest.approx(0.01)
    assert g.points[400] == pytest.approx(0.0, abs=1e-12)
    pg = collapse.pointer_grid(g, 0.2)
    assert pg.spacing == pytest.approx(g.spacing)
    assert np.allclose(pg.points[(pg.n - g.n) // 2:][: g.n], g.points)


def test_grid_validation():
    with pytest.raises(InputError):
        LineGrid(0.0, 1.0, 1)
    with pytest.raises(InputError):
        LineGrid(1.0, 0.0, 10)


def test_ancilla_is_normalized_with_variance_delta_squared():
    anc = collapse.ancilla_state(0.3, LineGrid.centered(6.0, 0.005))
    assert anc.norm2() == pytest.approx(1.0, abs=1e-12)
    assert anc.mean() == pytest.approx(0.0, abs=1e-12)
    assert anc.variance() == pytest.approx(0.09, rel=1e-6)


def test_ancilla_needs_room():
    with pytest.raises(GridTooNarrow):
        collapse.ancilla_state(1.0, LineGrid.centered(4.0, 0.01))
    with pytest.raises(InputError):
        collapse.ancilla_state(0.0, GRID)


def test_wave_function_checks():
    with pytest.raises(InputError):
        WaveFunction(GRID, np.ones(5))
    with pytest.raises(InvalidState):
        WaveFunction(GRID, np.full(GRID.n, np.inf))
    with pytest.raises(InvalidState):
        WaveFunction(GRID, np.zeros(GRID.n)).normalized()
    unnormalized = WaveFunction(GRID, 2 * collapse.gaussian_packet(GRID, 0, 0.2).amplitudes)
    with pytest.raises(InvalidState):
        collapse.hit(unnormalized, HitParams(0.1, 0.0))


def test_entangle_is_normalized_and_ridged():
    g = LineGrid.centered(3.0, 0.02)
    psi = collapse.two_peak_state(g, 0.5, 2.0, 0.1)
    anc = collapse.ancilla_state(0.1, collapse.pointer_grid(g, 0.1))
    phi = collapse.entangle(psi, anc)
    assert phi.norm2() == pytest.approx(1.0, abs=1e-12)
    # the joint density follows x_A = q: its peak in each row sits at the row's q
    rows = np.argmax(np.abs(phi.amplitudes), axis=1)
    peak_rows = np.argsort(psi.density())[-5:]
    for r in peak_rows:
        assert anc.grid.points[rows[r]] == pytest.approx(g.points[r], abs=1e-9)


def test_project_pointer_examples():
    g = LineGrid.centered(3.0, 0.02)
    psi = collapse.gaussian_packet(g, 0.0, 0.3)
    pg = collapse.pointer_grid(g, 0.2)
    phi = collapse.entangle(psi, collapse.ancilla_state(0.2, pg))
    post, n = collapse.project_pointer(phi, 0.0)
    assert post.norm2() == pytest.approx(1.0, abs=1e-12)
    assert post.mean() == pytest.approx(0.0, abs=1e-12)
    mean, var = oracles.product_of_gaussians(0.0, 0.09, 0.0, 0.04)
    assert post.variance() == pytest.approx(var, rel=1e-4)
    with pytest.raises(ZeroProbabilityOutcome):
        collapse.project_pointer(phi, pg.q_max + 1.0)


def test_hit_on_gaussian_matches_product_rule():
    g = LineGrid.centered(5.0, 0.005)
    psi = collapse.gaussian_packet(g, 0.5, 0.4)
    post, n2 = collapse.hit(psi, HitParams(0.3, -0.2))
    mean, var = oracles.product_of_gaussians(0.5, 0.16, -0.2, 0.09)
    assert post.mean() == pytest.approx(mean, abs=1e-9)
    assert post.variance() == pytest.approx(var, rel=1e-8)
    # N^2 is the normal density of qbar - q0 with variance sigma^2 + delta^2
    expected = math.exp(-0.7**2 / (2 * 0.25)) / math.sqrt(2 * math.pi * 0.25)
    assert n2 == pytest.approx(expected, rel=1e-8)


def test_hit_rejects_far_outcomes():
    psi = collapse.gaussian_packet(GRID, 0.0, 0.2)
    with pytest.raises(InputError):
        collapse.hit(psi, HitParams(0.1, 10.0))
    with pytest.raises(InputError):
        HitParams(-1.0, 0.0)
    narrow = collapse.gaussian_packet(GRID, -3.5, 0.01)
    with pytest.raises(ZeroProbabilityOutcome):
        collapse.hit(narrow, HitParams(0.01, 4.0))


def test_hit_equals_pointer_chain_on_lattice():
    d = hit_equivalence_distances(LineGrid.centered(4.0, 0.01), 0.2, seed=7, n_states=3, n_outcomes=3)
    assert max(d) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.5))
def test_hit_output_normalized(seed, delta):
    g = LineGrid.centered(4.0, 0.02)
    rng = np.random.default_rng(seed)
    psi = random_superposition(g, rng)
    qbar = float(rng.uniform(-2, 2))
    post, n2 = collapse.hit(psi, HitParams(delta, qbar))
    assert post.norm2() == pytest.approx(1.0, abs=1e-12)
    assert n2 > 0


def test_outcome_pdf_examples():
    psi = collapse.two_peak_state(GRID, 0.5, 2.0, 0.1)
    pdf = collapse.outcome_pdf(psi, 0.1)
    assert pdf.integral() == pytest.approx(1.0, abs=1e-9)
    assert pdf.mass_above(0.0) == pytest.approx(0.5, abs=1e-9)
    cdf = pdf.cdf()
    assert cdf[0] == 0.0 and cdf[-1] == 1.0 and np.all(np.diff(cdf) >= 0)


def test_outcome_pdf_of_gaussian_is_convolution():
    psi = collapse.gaussian_packet(GRID, 0.3, 0.2)
    pdf = collapse.outcome_pdf(psi, 0.15)
    sd = math.sqrt(0.04 + 0.0225)
    expected = np.exp(-((pdf.qbar - 0.3) ** 2) / (2 * sd * sd)) / math.sqrt(2 * math.pi) / sd
    assert np.max(np.abs(pdf.values - expected)) < 1e-8
    assert pdf.mean() == pytest.approx(0.3, abs=1e-9)


def test_sampling_is_deterministic_and_consistent():
    psi = collapse.two_peak_state(GRID, 0.7, 2.0, 0.1)
    a = collapse.sample_outcomes(psi, 0.1, seed=11, n_runs=50)
    b = collapse.sample_outcomes(psi, 0.1, seed=11, n_runs=50)
    assert np.array_equal(a.qbar, b.qbar) and np.array_equal(a.weight, b.weight)
    for i in (0, 17, 49):
        s = collapse.sample_outcome(psi, 0.1, 11 + i)
        assert s.qbar == a.qbar[i]
        assert s.pdf_value == pytest.approx(a.weight[i], rel=1e-12)
    c = collapse.sample_outcomes(psi, 0.1, seed=12, n_runs=50)
    assert not np.array_equal(a.qbar, c.qbar)


def test_inverse_cdf_reproduces_density():
    psi = collapse.gaussian_packet(GRID, 0.0, 0.3)
    ens = collapse.sample_outcomes(psi, 0.2, seed=3, n_runs=20000)
    sd = math.sqrt(0.09 + 0.04)
    assert np.mean(ens.qbar) == pytest.approx(0.0, abs=4 * sd / math.sqrt(20000))
    assert np.std(ens.qbar) == pytest.approx(sd, rel=0.03)


def test_ensemble_csv(tmp_path):
    psi = collapse.gaussian_packet(GRID, 0.0, 0.3)
    ens = collapse.sample_outcomes(psi, 0.2, seed=3, n_runs=4)
    ens.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "run,qbar,weight" and len(lines) == 5
    assert float(lines[2].split(",")[1]) == ens.qbar[1]
    assert ens.summary()["n_runs"] == 4


def test_repeated_hits_localize():
    g = LineGrid(-4.0, 4.0, 2001)
    start = WaveFunction(g, collapse.gaussian_packet(g, 1.5, 0.2).amplitudes
                         + collapse.gaussian_packet(g, -1.5, 0.2).amplitudes).normalized()
    delta = 0.2
    localized = 0
    for seed in range(100):
        psi, outcomes = collapse.repeated_hits(start, delta, 50, seed)
        far = np.abs(g.points - psi.mean()) > 5 * delta
        localized += psi.mass_where(far) < 1e-6
    assert localized >= 99
