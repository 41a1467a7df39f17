"""Compare the compiled kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because the choice is made at import
time from ``UNRAVEL_DISABLE_NUMBA``.

    python benchmarks/bench_kernels.py [--samples 2000] [--points 201]
"""

import argparse
import json
import os
import subprocess
import sys
import time

WORKER = "--worker"


def worker(samples: int, points: int) -> dict:
    import numpy as np

    from unravel import config
    from unravel.catalog import (DEMO_ALPHA, OscillatorParams, coherent_state,
                                 make_damped_oscillator, make_dephasing)
    from unravel.jumptime import evolve_jumptime
    from unravel.phasespace import grid, wigner
    from unravel.trajectories import run_ensemble

    psi = np.array([np.cos(0.4), np.exp(0.7j) * np.sin(0.4)])
    qubit = make_dephasing((0.3, 0.0, 0.5))
    osc = make_damped_oscillator(OscillatorParams())
    c = coherent_state(DEMO_ALPHA, 32)
    rho5 = evolve_jumptime(osc, np.outer(c, c.conj()), 5).states[5]
    xs = grid(5.0, points)

    # warm-up triggers compilation (or loads the on-disk cache)
    run_ensemble(qubit, psi, n_samples=4, seed=0, max_time=1.0, capture_times=[1.0])
    run_ensemble(osc, c, n_samples=4, seed=0, max_time=5.0, max_jumps=2, capture_jumps=[2])
    wigner(rho5, xs[:3], xs[:3])

    out = {"numba": config.USE_NUMBA}
    t = time.perf_counter()
    run_ensemble(qubit, psi, n_samples=samples, seed=1, max_time=3.0, capture_times=[0.5, 1, 3],
                 threads=1)
    out["qubit_walltime_us_per_traj"] = 1e6 * (time.perf_counter() - t) / samples
    t = time.perf_counter()
    run_ensemble(osc, c, n_samples=samples, seed=1, max_time=400.0, max_jumps=10,
                 capture_jumps=[2, 5, 10], threads=1)
    out["oscillator_jumptime_us_per_traj"] = 1e6 * (time.perf_counter() - t) / samples
    t = time.perf_counter()
    wigner(rho5, xs, xs)
    out[f"wigner_{points}x{points}_ms"] = 1e3 * (time.perf_counter() - t)
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--points", type=int, default=201)
    ap.add_argument(WORKER, action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        print(json.dumps(worker(args.samples, args.points)))
        return

    results = {}
    for name, disable in (("numba", False), ("numpy", True)):
        env = dict(os.environ)
        env.pop("UNRAVEL_DISABLE_NUMBA", None)
        if disable:
            env["UNRAVEL_DISABLE_NUMBA"] = "1"
        proc = subprocess.run([sys.executable, __file__, WORKER, "--samples", str(args.samples),
                               "--points", str(args.points)],
                              env=env, check=True, capture_output=True, text=True)
        results[name] = json.loads(proc.stdout)
    if not results["numba"]["numba"]:
        print("note: numba is not importable, both columns use the numpy path")

    keys = [k for k in results["numba"] if k != "numba"]
    print(f"{'kernel':36s} {'numba':>12s} {'numpy':>12s} {'speedup':>8s}")
    for k in keys:
        a, b = results["numba"][k], results["numpy"][k]
        print(f"{k:36s} {a:12.1f} {b:12.1f} {b / a:8.1f}x")


if __name__ == "__main__":
    main()
