"""Command-line front end.

Pipeline: ``refine-po`` writes orbit.json into the output directory,
``floquet`` augments it with the leading Floquet pair, ``continue`` runs
the manifold continuation (checkpointing every accepted step, resumable
with --checkpoint), ``verify`` runs the small-model structure checks, and
``export`` re-emits the artifact set from a checkpoint.

Failures exit nonzero after printing a machine-readable error JSON to
stderr.  Set MANIFOLD_LOG=debug|info|warning to control log verbosity.
"""

import functools
import json
import logging
import os
import sys

import click
import numpy as np

from . import __version__, runio
from .continuation import run as run_continuation
from .errors import ConfigError, OrbitContError
from .krylov import LinearOperator, verify_iteration_bound
from .bvp import ShootingProblem, Unknowns
from .stability import leading_floquet, refine_periodic_orbit

log = logging.getLogger("orbitcont")


def _setup_logging():
    level = os.environ.get("MANIFOLD_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(exc, code=1):
    doc = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(doc), file=sys.stderr)
    sys.exit(code)


def _guard(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except OrbitContError as exc:
            _fail(exc)
        except (OSError, ValueError, KeyError) as exc:
            _fail(exc)
    return wrapper


def _workers(cfg, workers_opt, k):
    if workers_opt is not None:
        return max(1, workers_opt)
    w = cfg.get("workers")
    if w is None:
        w = os.cpu_count() or 1
    # more workers than shooting intervals is waste
    return max(1, min(int(w), k))


config_opt = click.option("--config", "config_path", required=True,
                          type=click.Path(exists=True, dir_okay=False),
                          help="Run configuration (YAML).")
out_opt = click.option("--out", "outdir", required=True,
                       type=click.Path(file_okay=False),
                       help="Output directory.")
workers_opt = click.option("--workers", type=int, default=None,
                           help="Worker threads for segment integrations.")


@click.group()
@click.version_option(__version__)
def main():
    """Unstable-manifold continuation toolkit."""
    _setup_logging()


@main.command("refine-po")
@config_opt
@out_opt
@_guard
def cmd_refine_po(config_path, outdir):
    """Refine the periodic-orbit guess from the config; write orbit.json."""
    cfg = runio.load_config(config_path)
    h = runio.config_hash(cfg)
    field = runio.build_field(cfg)
    icfg = runio.build_integrator_config(cfg)
    orbit_cfg = cfg.get("orbit")
    if not orbit_cfg:
        raise ConfigError("refine-po needs an 'orbit' section")
    po = refine_periodic_orbit(
        np.array(orbit_cfg["guess_point"], dtype=float),
        float(orbit_cfg["guess_period"]), field, icfg,
        po_tol=orbit_cfg.get("po_tol"))
    os.makedirs(outdir, exist_ok=True)
    runio.write_orbit(os.path.join(outdir, "orbit.json"), po, h)
    click.echo(json.dumps({"period": po.period, "residual": po.residual,
                           "newton_iterations": len(po.newton_residuals) - 1}))


@main.command("floquet")
@config_opt
@out_opt
@_guard
def cmd_floquet(config_path, outdir):
    """Add the leading Floquet pair to orbit.json."""
    cfg = runio.load_config(config_path)
    h = runio.config_hash(cfg)
    field = runio.build_field(cfg)
    icfg = runio.build_integrator_config(cfg)
    path = os.path.join(outdir, "orbit.json")
    po, _ = runio.read_orbit(path)
    mode = (cfg.get("boundary") or {}).get("mode", "unstable-po")
    seed = (cfg.get("continuation") or {}).get("seed", 0)
    if mode.startswith("stable"):
        # dominant pair of the reversed-flow monodromy; store its forward form
        mu_rev, u1 = leading_floquet(po, field.reversed(), icfg, seed=seed)
        po.mu1, po.u1 = 1.0 / mu_rev, u1
    else:
        po.mu1, po.u1 = leading_floquet(po, field, icfg, seed=seed)
    runio.write_orbit(path, po, h)
    click.echo(json.dumps({"mu1": po.mu1, "u1": po.u1.tolist()}))


def _build_problem(cfg, workers, outdir=None, po=None):
    field = runio.build_field(cfg)
    icfg = runio.build_integrator_config(cfg)
    mode = (cfg.get("boundary") or {}).get("mode", "unstable-po")
    if mode.endswith("-po") and po is None:
        if outdir is None:
            raise ConfigError("periodic-orbit mode needs orbit.json (run refine-po/floquet)")
        po, _ = runio.read_orbit(os.path.join(outdir, "orbit.json"))
    left = runio.build_left_boundary(cfg, po)
    bcs = runio.build_conditions(cfg)
    return ShootingProblem(field, left, bcs, icfg,
                           workers=min(workers, len(bcs)) if workers else 1), po


@main.command("continue")
@config_opt
@out_opt
@workers_opt
@click.option("--checkpoint", "checkpoint_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Resume from this checkpoint file.")
@_guard
def cmd_continue(config_path, outdir, workers, checkpoint_path):
    """Continue the manifold BVP family; write mesh and run tables."""
    cfg = runio.load_config(config_path)
    h = runio.config_hash(cfg)
    ccfg = runio.build_continuation_config(cfg)
    k0 = len(cfg.get("conditions", [])) or 1
    w = _workers(cfg, workers, k0)
    os.makedirs(outdir, exist_ok=True)

    resume = None
    if checkpoint_path is not None:
        resume = runio.read_checkpoint(checkpoint_path)
        if resume["config_hash"] != h:
            raise ConfigError(
                "checkpoint was produced by a different configuration "
                f"({resume['config_hash']} != {h})")

    problem, po = _build_problem(cfg, w, outdir=outdir)
    if resume is not None:
        problem = problem.with_bcs(resume["right_bcs"])

    ckpt_path = os.path.join(outdir, "checkpoint.json")

    def on_step(snap):
        runio.write_checkpoint(
            ckpt_path, cfg_hash=h, step=snap["step"], ds=snap["ds"],
            unknowns=snap["unknowns"], tangent=snap["tangent"],
            right_bcs=snap["problem"].right_bcs, par_ref=snap["par_ref"],
            mesh=snap["mesh"], diagram=snap["diagram"],
            convergence=snap["convergence"], timing=snap["timing"], orbit=po)

    eps0 = (cfg.get("boundary") or {}).get("eps0")
    theta0 = ((cfg.get("boundary") or {}).get("equilibrium") or {}).get("theta0")
    kwargs = {}
    if resume is not None:
        kwargs = dict(u0=resume["unknowns"], tangent0=resume["tangent"],
                      ds_init=resume["ds"], step_offset=resume["step"],
                      par_ref=resume["par_ref"])
    result = run_continuation(problem, ccfg, eps0=eps0, theta0=theta0,
                              on_step=on_step, **kwargs)

    if resume is not None:
        # splice: checkpointed history plus the resumed steps beyond it
        mesh = resume["mesh"]
        mesh.orbits.extend(result.mesh.orbits[1:])
        result.mesh = mesh
        for name in ("diagram", "convergence", "timing"):
            old = resume[name]
            new = [r for r in getattr(result, name) if r["step"] > resume["step"]]
            setattr(result, name, old + new)

    runio.write_run_artifacts(outdir, result, h, orbit=po)
    click.echo(json.dumps({
        "steps": len(result.diagram), "final_k": result.problem.k,
        "stop_reason": result.stop_reason,
        "par_final": result.diagram[-1]["par"] if result.diagram else None}))


@main.command("verify")
@config_opt
@out_opt
@workers_opt
@_guard
def cmd_verify(config_path, outdir, workers):
    """Structure checks on the configured problem at its seed solution.

    Verifies the unit-eigenvalue multiplicity of the dense bordered matrix,
    the 3k-1 GMRES iteration bound, the seed residual, and the agreement of
    the matrix-free Jacobian with finite differences.
    """
    cfg = runio.load_config(config_path)
    h = runio.config_hash(cfg)
    k0 = len(cfg.get("conditions", [])) or 1
    problem, _ = _build_problem(cfg, _workers(cfg, workers, k0), outdir=outdir)
    eps0 = (cfg.get("boundary") or {}).get("eps0")
    theta0 = ((cfg.get("boundary") or {}).get("equilibrium") or {}).get("theta0")
    u = problem.seed_initial_solution(eps0=eps0, theta0=theta0)
    report = verify_report(problem, u)
    os.makedirs(outdir, exist_ok=True)
    report_doc = {"artifact": "orbitcont-verify", "version": __version__,
                  "config_hash": h, **report}
    with open(os.path.join(outdir, "verify.json"), "w") as fh:
        json.dump(report_doc, fh, indent=1)
    click.echo(json.dumps(report))
    if not report["passed"]:
        sys.exit(2)


def verify_report(problem: ShootingProblem, u: Unknowns, tol=1e-6):
    """Dense-structure and Krylov-bound report at a given solution."""
    import numpy.linalg as la

    k, n, N = problem.k, problem.n, problem.N
    F = problem.residual(u)
    res = float(la.norm(F))
    tangent = np.zeros(N)
    tangent[-1] = 1.0

    A = problem.assemble_dense(u, tangent)
    mult = count_unit_eigenvalues(A, tol=tol)
    mult_expect = (k - 1) * (n - 1)

    op = LinearOperator(N, lambda v: problem.jacobian_apply(u, tangent, v))
    rhs = np.concatenate([-F, [0.0]])
    if la.norm(rhs) == 0.0:
        rhs = np.zeros(N)
        rhs[-1] = 1.0
    bound = verify_iteration_bound(op, rhs, k, tol=1e-8)

    rng = np.random.default_rng(0)
    jac_err = 0.0
    for _ in range(3):
        v = rng.standard_normal(N)
        v /= la.norm(v)
        exact = problem.jacobian_apply(u, tangent, v)
        saved = problem.jvp_mode
        problem.jvp_mode = "fd"
        approx = problem.jacobian_apply(u, tangent, v)
        problem.jvp_mode = saved
        jac_err = max(jac_err, float(la.norm(exact - approx) / max(1.0, la.norm(approx))))

    passed = (mult >= mult_expect and bound.bound_held
              and res <= 1e-6 and jac_err <= 1e-5)
    return {
        "k": k, "n": n, "N": N,
        "seed_residual": res,
        "unit_multiplicity": mult,
        "unit_multiplicity_expected": mult_expect,
        "gmres_iterations": bound.iterations,
        "gmres_limit": bound.limit,
        "gmres_bound_held": bound.bound_held,
        "jacobian_fd_error": jac_err,
        "passed": bool(passed),
    }


def count_unit_eigenvalues(A, tol=1e-6):
    """Count eigenvalues within ``tol`` of 1, in high precision.

    Clusters from a defective unit eigenvalue spread like eps^(1/s) under
    double-precision rounding (s the Jordan block size), which can exceed
    ``tol``; computing the spectrum of the exact float matrix with extra
    working precision keeps the cluster tight.
    """
    import mpmath as mp

    n = A.shape[0]
    with mp.workdps(60):
        M = mp.matrix(n, n)
        for i in range(n):
            for j in range(n):
                M[i, j] = mp.mpf(float(A[i, j]))
        eigs, _ = mp.eig(M)
        return int(sum(1 for e in eigs if abs(e - 1) < tol))


@main.command("export")
@out_opt
@click.option("--checkpoint", "checkpoint_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Checkpoint file to export from.")
@_guard
def cmd_export(outdir, checkpoint_path):
    """Re-emit the artifact set (mesh, tables) from a checkpoint."""
    ck = runio.read_checkpoint(checkpoint_path)
    h = ck["config_hash"]
    os.makedirs(outdir, exist_ok=True)
    runio.write_mesh(os.path.join(outdir, "mesh.json"), ck["mesh"], h)
    runio.write_csv(os.path.join(outdir, "diagram.csv"), ck["diagram"],
                    runio.DIAGRAM_FIELDS, h)
    runio.write_csv(os.path.join(outdir, "convergence.csv"), ck["convergence"],
                    runio.CONVERGENCE_FIELDS, h)
    runio.write_csv(os.path.join(outdir, "timing.csv"), ck["timing"],
                    runio.TIMING_FIELDS, h)
    if ck["orbit"] is not None:
        runio.write_orbit(os.path.join(outdir, "orbit.json"), ck["orbit"], h)
    click.echo(json.dumps({"orbits": len(ck["mesh"].orbits), "step": ck["step"]}))


if __name__ == "__main__":
    main()
