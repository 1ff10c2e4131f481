"""Benchmark the compiled stepper against the pure-NumPy fallback.

Runs the same nonlinear mode systems through both lanes and reports wall
time, step counts, and the coordinate deviation between lanes.

    python benchmarks/bench_integrator.py [--t-end 100] [--tol 1e-10]
"""
import argparse
import time

import numpy as np

import kirchsim as ks
from kirchsim import integrate


def run_case(n_modes, t_end, tol, backend):
    spec = ks.string_spectrum(n_modes)
    nl = ks.Nonlinearity.affine(1.0)
    k = np.arange(1, n_modes + 1, dtype=float)
    init = ks.State(t=0.0, u=0.3 * np.cos(k) / k**1.5, v=0.3 * np.sin(2 * k) / k**0.5)
    t0 = time.perf_counter()
    traj = ks.evolve_kirchhoff(spec, nl, init, t_end, tol, backend=backend)
    wall = time.perf_counter() - t0
    return traj, wall


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--modes", type=int, nargs="+", default=[8, 32])
    parser.add_argument("--t-end", type=float, default=100.0)
    parser.add_argument("--tol", type=float, default=1e-10)
    args = parser.parse_args()

    backends = integrate.available_backends()
    if len(backends) < 2:
        print("compiled extension not built; benchmarking the python lane only")

    print(f"{'modes':>6} {'backend':>9} {'steps':>9} {'wall [s]':>9} "
          f"{'steps/s':>11} {'drift':>10}")
    for n in args.modes:
        results = {}
        for backend in backends:
            traj, wall = run_case(n, args.t_end, args.tol, backend)
            results[backend] = (traj, wall)
            print(f"{n:>6} {backend:>9} {traj.info.n_steps:>9} {wall:>9.3f} "
                  f"{traj.info.n_steps / wall:>11.0f} {traj.info.ham_drift:>10.2e}")
        if len(results) == 2:
            (ta, wa), (tb, wb) = results["compiled"], results["python"]
            dev = max(np.max(np.abs(ta.final.u - tb.final.u)),
                      np.max(np.abs(ta.final.v - tb.final.v)))
            print(f"{'':>6} {'speedup':>9} {wb / wa:>9.1f}x"
                  f"{'':>10} final-state deviation {dev:.2e}")


if __name__ == "__main__":
    main()
