"""Scenario runners used by the command line.

Each runner takes a validated :class:`~hybridyn.config.RunConfig` and an output
directory, writes its files and returns ``(summary, details)``. ``summary`` is
written to ``summary.json`` and depends only on the configuration and seed;
``details`` goes into ``metadata.json``.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from . import collapse, hybrid, stern_gerlach
from .config import RunConfig
from .phase_space import MatrixField, PhaseGrid, coarse_grain, integrate, write_field_csv


def _complex_pair(z) -> list:
    return [float(z.real), float(z.imag)]


def _matrix_pairs(m) -> list:
    return [[_complex_pair(z) for z in row] for row in np.asarray(m)]


def write_elements(state: hybrid.HybridState, out: Path) -> list[str]:
    """Write every upper-triangle matrix element as ``x,p,re,im`` rows."""
    X, P = state.grid.mesh()
    names = []
    for a in range(state.dim):
        for b in range(a, state.dim):
            v = state.values[a, b]
            rows = np.column_stack([X.ravel(), P.ravel(), v.real.ravel(), v.imag.ravel()])
            name = f"element_{a}{b}.csv"
            np.savetxt(out / name, rows, delimiter=",", fmt="%.17g", header="x,p,re,im", comments="", newline="\n")
            names.append(name)
    return names


def _write_marginals(before: hybrid.HybridState, after: hybrid.HybridState, out: Path) -> None:
    write_field_csv(hybrid.classical_marginal(before), out / "marginal_before.csv")
    write_field_csv(hybrid.classical_marginal(after), out / "marginal_after.csv")


def run_stern_gerlach(cfg: RunConfig, out: Path, dump_elements: bool = False):
    grid = cfg.grid()
    g = cfg.get("sg.g")
    params = stern_gerlach.SGParams(g, stern_gerlach.SpinAmplitudes(cfg.get("sg.c_plus"), cfg.get("sg.c_minus")))
    before = stern_gerlach.initial_state(params.spin, grid)
    path = cfg.get("sg.path")
    if path == "analytic":
        after = stern_gerlach.analytic_propagate(params.spin, g, grid)
    else:
        after = stern_gerlach.numeric_propagate(before, g, cfg.get("sg.n_substeps"))
    r = stern_gerlach.readout(after, g)
    _write_marginals(before, after, out)
    files = ["marginal_before.csv", "marginal_after.csv"]
    if dump_elements:
        files += write_elements(after, out)
    summary = {
        "g": g,
        "c_plus": _complex_pair(params.spin.c_plus),
        "c_minus": _complex_pair(params.spin.c_minus),
        "p_plus": r.p_plus,
        "p_minus": r.p_minus,
        "pointer_means": [r.pointer_mean_plus, r.pointer_mean_minus],
        "offdiag_norm": r.offdiag_norm,
        "offdiag_l1": r.offdiag_l1,
        "offdiag_ratio": stern_gerlach.offdiag_ratio(after, before),
        "damping_factor": stern_gerlach.damping_factor(g),
        "quantum_marginal": _matrix_pairs(hybrid.quantum_marginal(after)),
        "path": path,
    }
    details = {"delta": params.delta, "files": files,
               "hamiltonian": {"h_int": "g * delta(t) * p * sigma_z", "self_terms": "none during impulse"}}
    return summary, details


def run_hit_sample(cfg: RunConfig, out: Path, dump_elements: bool = False):
    grid = collapse.LineGrid.centered(cfg.get("hit.half_width"), cfg.get("hit.spacing"))
    psi = collapse.two_peak_state(grid, cfg.get("hit.weight_plus"), cfg.get("hit.separation"), cfg.get("hit.width"))
    ens = collapse.sample_outcomes(psi, cfg.get("hit.delta"), cfg.seed, cfg.get("hit.n_runs"))
    ens.to_csv(out / "samples.csv")
    summary = ens.summary()
    density = collapse.outcome_pdf(psi, cfg.get("hit.delta"))
    details = {
        "files": ["samples.csv"],
        "system_grid": grid.to_dict(),
        "pdf_mass_above_zero": density.mass_above(0.0),
        "per_run_seed": "seed + run_index",
    }
    return summary, details


def random_superposition(grid: collapse.LineGrid, rng) -> collapse.WaveFunction:
    """Two to four Gaussian packets with random centres, widths and complex weights."""
    n = int(rng.integers(2, 5))
    centers = rng.uniform(-2.0, 2.0, n)
    widths = rng.uniform(0.1, 0.5, n)
    coeffs = rng.normal(size=n) + 1j * rng.normal(size=n)
    amp = sum(c * collapse.gaussian_packet(grid, m, w).amplitudes for c, m, w in zip(coeffs, centers, widths))
    return collapse.WaveFunction(grid, amp).normalized()


def hit_equivalence_distances(grid: collapse.LineGrid, delta: float, seed: int, n_states: int, n_outcomes: int):
    """L2 distances between direct hits and the pointer chain, for random states and sampled outcomes.

    Outcomes are drawn from each state's Born density and moved to the nearest
    pointer-grid node.
    """
    pgrid = collapse.pointer_grid(grid, delta)
    anc = collapse.ancilla_state(delta, pgrid)
    nodes = pgrid.points
    out = []
    for s in range(n_states):
        rng = np.random.default_rng(seed + s)
        psi = random_superposition(grid, rng)
        phi = collapse.entangle(psi, anc)
        for _ in range(n_outcomes):
            q = collapse.sample_outcome(psi, delta, rng).qbar
            q = float(nodes[int(np.argmin(np.abs(nodes - q)))])
            chain, _ = collapse.project_pointer(phi, q)
            direct, _ = collapse.hit(psi, collapse.HitParams(delta, q))
            out.append(collapse.l2_distance(chain, direct))
    return out


def run_hit_equivalence(cfg: RunConfig, out: Path, dump_elements: bool = False):
    grid = collapse.LineGrid.centered(cfg.get("hit.half_width"), cfg.get("hit.spacing"))
    d = hit_equivalence_distances(grid, cfg.get("hit.delta"), cfg.seed, cfg.get("hit.n_states"),
                                  cfg.get("hit.n_outcomes"))
    summary = {
        "n_states": cfg.get("hit.n_states"),
        "n_outcomes": cfg.get("hit.n_outcomes"),
        "seed": cfg.seed,
        "delta": cfg.get("hit.delta"),
        "max_l2": max(d),
        "distances": d,
    }
    return summary, {"files": [], "system_grid": grid.to_dict()}


def bloch_state(theta: float, phi: float) -> np.ndarray:
    v = np.array([math.cos(theta / 2), complex(math.cos(phi), math.sin(phi)) * math.sin(theta / 2)])
    return np.outer(v, v.conj())


def _smoothed(state: hybrid.HybridState) -> hybrid.HybridState:
    s = coarse_grain(state.field)
    return hybrid.HybridState(MatrixField(state.grid, s.values / integrate(s.trace()), hermitian=True))


def linear_coupling_setup(grid: PhaseGrid, lam: float, rho_q, coupling=hybrid.SIGMA_Z, coordinate="x",
                          harmonic=True, x0=0.0, p0=0.0, var_x=1.0, var_p=1.0, coarse=True):
    """Hamiltonian ``[1/2 (x^2 + p^2)] + lam * coordinate * coupling`` and a product initial state."""
    H = hybrid.HybridHamiltonian.build(
        grid,
        h_c=hybrid.harmonic_potential if harmonic else None,
        h_int=hybrid.linear_coupling(lam, coupling, coordinate),
    )
    g = hybrid.gaussian_distribution(grid, x0, p0, var_x, var_p)
    g = hybrid.ClassicalDistribution(grid, g.values / integrate(g))
    state = hybrid.product_state(rho_q, g)
    return H, (_smoothed(state) if coarse else state)


_MATRICES = {"sigma_x": hybrid.SIGMA_X, "sigma_y": hybrid.SIGMA_Y, "sigma_z": hybrid.SIGMA_Z}


def _evolution_summary(final, trace, dt, n_steps, generator, scheme):
    return {
        "t_final": n_steps * dt,
        "n_steps": n_steps,
        "dt": dt,
        "generator": generator,
        "scheme": scheme,
        "min_eig": trace.lowest,
        "final_min_eig": trace.min_eig[-1],
        "drift_rate": trace.drift_rate,
        "max_step_drift": trace.max_drift,
        "max_hermiticity_defect": max(trace.hermiticity),
        "quantum_marginal": _matrix_pairs(hybrid.quantum_marginal(final)),
    }


def run_hybrid_evolve(cfg: RunConfig, out: Path, dump_elements: bool = False):
    grid = cfg.grid()
    H, state = linear_coupling_setup(
        grid, cfg.get("evolve.lam"), bloch_state(cfg.get("evolve.theta"), cfg.get("evolve.phi")),
        _MATRICES[cfg.get("evolve.coupling")], cfg.get("evolve.coordinate"), cfg.get("evolve.harmonic"),
        cfg.get("evolve.x0"), cfg.get("evolve.p0"), cfg.get("evolve.var_x"), cfg.get("evolve.var_p"),
        cfg.get("evolve.coarse"),
    )
    dt = cfg.get("evolve.dt")
    n_steps = int(round(cfg.get("evolve.t_final") / dt))
    final, trace = hybrid.step(state, H, dt, n_steps, cfg.get("evolve.generator"), cfg.get("evolve.scheme"),
                               record_every=cfg.get("evolve.record_every"), check_admissibility=False)
    trace.to_csv(out / "positivity_trace.csv")
    _write_marginals(state, final, out)
    files = ["positivity_trace.csv", "marginal_before.csv", "marginal_after.csv"]
    if dump_elements:
        files += write_elements(final, out)
    summary = _evolution_summary(final, trace, dt, n_steps, cfg.get("evolve.generator"), cfg.get("evolve.scheme"))
    summary["admissibility_distance"] = hybrid.admissibility_check(state.field).distance
    details = {"files": files, "hamiltonian": H.describe(), "dt_max": hybrid.max_stable_dt(H)}
    return summary, details


def run_positivity_probe(cfg: RunConfig, out: Path, dump_elements: bool = False):
    grid = cfg.grid()
    probe = hybrid.PositivityProbe(
        variance=cfg.get("probe.variance"), lam=cfg.get("probe.lam"), coupling=cfg.get("probe.coupling"),
        coarse=cfg.get("probe.coarse"), dt=cfg.get("probe.dt"), t_final=cfg.get("probe.t_final"),
    )
    generator = cfg.get("probe.generator")
    before = probe.initial_state(grid)
    final, trace = probe.run(grid, generator, record_every=cfg.get("probe.record_every"))
    trace.to_csv(out / "positivity_trace.csv")
    _write_marginals(before, final, out)
    files = ["positivity_trace.csv", "marginal_before.csv", "marginal_after.csv"]
    if dump_elements:
        files += write_elements(final, out)
    summary = _evolution_summary(final, trace, probe.dt, probe.n_steps, generator, "central")
    summary["negative"] = trace.lowest < -hybrid.EPS_POS
    details = {"files": files, "hamiltonian": probe.hamiltonian(grid).describe(),
               "dt_max": hybrid.max_stable_dt(probe.hamiltonian(grid))}
    return summary, details


RUNNERS = {
    "stern-gerlach": run_stern_gerlach,
    "hit-sample": run_hit_sample,
    "hit-equivalence": run_hit_equivalence,
    "hybrid-evolve": run_hybrid_evolve,
    "positivity-probe": run_positivity_probe,
}
