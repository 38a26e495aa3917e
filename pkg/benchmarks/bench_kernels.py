"""Time the compiled kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--n 128] [--repeat 20] [--json out.json]

Reports the best-of-``repeat`` time per call for each kernel and for one full
RK4 step of the corrected generator on a spin-1/2 state, plus the speedup of
the compiled backend. Both backends are also checked to agree.
"""

import argparse
import json
import timeit

import numpy as np

from hybridyn import _backend, _kernels_py, hybrid
from hybridyn.phase_space import PhaseGrid
from hybridyn.scenarios import bloch_state, linear_coupling_setup


def _random_hermitian(rng, d, n):
    a = rng.normal(size=(d, d, n, n)) + 1j * rng.normal(size=(d, d, n, n))
    return a + np.conj(np.swapaxes(a, 0, 1))


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def run(n=128, repeat=20):
    rng = np.random.default_rng(0)
    H, Hx, Hp, rho = (_random_hermitian(rng, 2, n) for _ in range(4))
    rx = _kernels_py.diff_zero(rho, 0.1, 0)
    rp = _kernels_py.diff_zero(rho, 0.1, 1)
    grid = PhaseGrid(n_x=n, n_p=n)
    Hh, state = linear_coupling_setup(grid, 1.0, bloch_state(np.pi / 2, 0.0))

    cases = {
        "diff_zero": lambda: _backend.diff_zero(rho, 0.1, 0),
        "assemble": lambda: _backend.assemble(H, Hx, Hp, rho, rx, rp, True),
        "min_eig": lambda: _backend.min_eig(rho),
        "rk4_step": lambda: hybrid.step(state, Hh, 1e-3, 1, check_admissibility=False),
    }
    results = {}
    outputs = {}
    for backend in _backend.available():
        with _backend.use(backend):
            results[backend] = {name: _best(fn, repeat) for name, fn in cases.items()}
            outputs[backend] = hybrid.step(state, Hh, 1e-3, 5, check_admissibility=False)[0].values
    report = {"n": n, "repeat": repeat, "seconds": results}
    if "cython" in results:
        report["speedup"] = {k: results["python"][k] / results["cython"][k] for k in cases}
        report["max_abs_diff_5_steps"] = float(np.max(np.abs(outputs["cython"] - outputs["python"])))
    return report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--json")
    args = ap.parse_args()
    report = run(args.n, args.repeat)
    backends = list(report["seconds"])
    print(f"grid {args.n}x{args.n}, d = 2, best of {args.repeat}")
    print(f"{'kernel':<12}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if "speedup" in report else ""))
    for k in report["seconds"][backends[0]]:
        row = f"{k:<12}" + "".join(f"{report['seconds'][b][k] * 1e3:>10.3f}ms" for b in backends)
        if "speedup" in report:
            row += f"{report['speedup'][k]:>11.2f}x"
        print(row)
    if "max_abs_diff_5_steps" in report:
        print(f"backends agree after 5 RK4 steps to {report['max_abs_diff_5_steps']:.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(report, fh, indent=2)


if __name__ == "__main__":
    main()
