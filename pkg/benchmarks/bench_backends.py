"""Compare the numba and pure-numpy kernel builds on the hot paths.

The backend is fixed at import time by MANIFOLD_BACKEND, so this script
times the current process and, unless --no-subprocess is given, re-runs
itself once with MANIFOLD_BACKEND=numpy to collect the fallback numbers.

    python3 benchmarks/bench_backends.py
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from orbitcont import IntegratorConfig, backend, extended_trajectory, integrate, lorenz
from orbitcont.bvp import BoundaryCondition, LeftBoundary, ShootingProblem
from orbitcont.stability import leading_floquet, refine_periodic_orbit

X0 = np.array([-13.7638, -19.5789, 27.0])
PERIOD = 1.5587


def timeit(fn, repeats):
    fn()  # warm-up (jit compile / cache load)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def collect(repeats):
    field = lorenz()
    cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12)
    results = {"backend": backend.BACKEND}

    results["integrate_orbit"] = timeit(
        lambda: integrate(field, X0, PERIOD, cfg), repeats)
    v0 = np.array([1.0, 0.0, 0.0])
    results["extended_trajectory"] = timeit(
        lambda: extended_trajectory(field, X0, v0, PERIOD, cfg,
                                    with_arclength=True), repeats)

    po = refine_periodic_orbit(X0, PERIOD, field, cfg)
    po.mu1, po.u1 = leading_floquet(po, field, cfg)
    bcs = [BoundaryCondition.poincare([0.0, 0.0, 1.0], 30.0),
           BoundaryCondition.fixed_time(0.3),
           BoundaryCondition.arclength(12.0)]
    problem = ShootingProblem(field, LeftBoundary.periodic_orbit(po), bcs, cfg)
    u = problem.seed_initial_solution(eps0=1e-4)
    tangent = np.zeros(problem.N)
    tangent[-1] = 1.0
    rng = np.random.default_rng(0)
    v = rng.standard_normal(problem.N)
    results["shooting_residual"] = timeit(lambda: problem.residual(u), repeats)
    results["jacobian_apply"] = timeit(
        lambda: problem.jacobian_apply(u, tangent, v), repeats)
    return results


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--json", action="store_true",
                    help="emit raw JSON instead of the comparison table")
    ap.add_argument("--no-subprocess", action="store_true",
                    help="only time the current backend")
    args = ap.parse_args()

    mine = collect(args.repeats)
    if args.json:
        print(json.dumps(mine))
        return
    rows = [mine]
    if not args.no_subprocess:
        other = "numpy" if backend.BACKEND == "numba" else "numba"
        env = dict(os.environ, MANIFOLD_BACKEND=other)
        out = subprocess.run(
            [sys.executable, __file__, "--repeats", str(args.repeats), "--json"],
            env=env, capture_output=True, text=True, check=True)
        rows.append(json.loads(out.stdout.strip().splitlines()[-1]))

    keys = [k for k in rows[0] if k != "backend"]
    header = f"{'kernel':24s}" + "".join(f"{r['backend']:>12s}" for r in rows)
    if len(rows) == 2:
        header += f"{'ratio':>10s}"
    print(header)
    for key in keys:
        line = f"{key:24s}" + "".join(f"{r[key] * 1e3:10.3f}ms" for r in rows)
        if len(rows) == 2:
            line += f"{rows[1][key] / rows[0][key]:9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
