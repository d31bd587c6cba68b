"""Pseudo-arclength continuation of the shooting BVP.

The family of orbit segments is continued in the scalar parameter (log
distance along the unstable eigendirection, or the angle on the
equilibrium circle) with secant predictors, bordered Newton-Krylov
correctors and adaptive step control.  Accepted orbits are resampled at
uniform arc length into a mesh of the manifold patch.
"""

import logging
import time as _time
from dataclasses import dataclass, field as dc_field
from typing import List, Optional

import numpy as np

from .bvp import BoundaryCondition, FIXED_TIME, PO_RAY, ShootingProblem, Unknowns
from .errors import ContinuationError, NewtonError, OrbitContError
from .krylov import LinearOperator, gmres
from .stability import segment_amplification

log = logging.getLogger("orbitcont")


@dataclass
class ContinuationConfig:
    ds0: float = 0.05
    ds_min: float = 1e-8
    ds_max: float = 0.5
    newton_tol: float = 1e-8
    newton_max: int = 8
    gmres_tol: Optional[float] = None  # None: forcing term min(1e-3, |F|)
    gmres_extra: int = 5  # iteration headroom beyond the 3k-1 design bound
    max_steps: int = 50
    par_span: Optional[float] = None  # stop once |par - par0| reaches this
    max_total_time: Optional[float] = None  # stop on summed orbit time
    amplification_threshold: float = 1e6
    max_intervals: int = 40
    samples_per_orbit: int = 128
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.ds_min <= self.ds0 <= self.ds_max):
            raise ValueError("need 0 < ds_min <= ds0 <= ds_max")
        if self.newton_tol <= 0 or self.newton_max < 1:
            raise ValueError("bad Newton settings")


@dataclass
class ContinuationPoint:
    """One accepted point of the continued family."""

    unknowns: Unknowns
    tangent: np.ndarray
    residual_norm: float
    newton_residuals: List[float]
    gmres_iterations: List[int]
    fold: bool = False

    @property
    def par(self):
        return self.unknowns.par


@dataclass
class MeshOrbit:
    """One orbit of the mesh: uniform-arclength samples plus its solution."""

    samples: np.ndarray  # (ns, n)
    start: np.ndarray  # birth point gamma(0)
    par: float
    total_time: float
    total_arclength: float
    unknowns: Unknowns

    def to_dict(self):
        return {
            "samples": self.samples.tolist(),
            "start": self.start.tolist(),
            "par": self.par,
            "total_time": self.total_time,
            "total_arclength": self.total_arclength,
            "unknowns": self.unknowns.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["samples"], dtype=float),
                   np.array(d["start"], dtype=float), float(d["par"]),
                   float(d["total_time"]), float(d["total_arclength"]),
                   Unknowns.from_dict(d["unknowns"]))


@dataclass
class ManifoldMesh:
    """The computed manifold patch: a family of resampled orbits."""

    orbits: List[MeshOrbit] = dc_field(default_factory=list)
    metadata: dict = dc_field(default_factory=dict)

    def to_dict(self):
        return {"metadata": self.metadata,
                "orbits": [o.to_dict() for o in self.orbits]}

    @classmethod
    def from_dict(cls, d):
        return cls([MeshOrbit.from_dict(o) for o in d["orbits"]],
                   dict(d.get("metadata", {})))


@dataclass
class ContinuationRun:
    mesh: ManifoldMesh
    points: List[ContinuationPoint]
    diagram: List[dict]
    convergence: List[dict]
    timing: List[dict]
    problem: ShootingProblem
    stop_reason: str = ""


def initial_tangent(N):
    """First continuation direction: pure parameter motion."""
    t = np.zeros(N)
    t[-1] = 1.0
    return t


def tangent_secant(u_new: Unknowns, u_old: Unknowns, prev_tangent):
    """Normalized secant direction, oriented to continue the prev tangent."""
    d = u_new.pack() - u_old.pack()
    nd = np.linalg.norm(d)
    if nd == 0.0:
        return np.asarray(prev_tangent, dtype=float).copy()
    d /= nd
    if d @ prev_tangent < 0.0:
        d = -d
    return d


def correct(problem: ShootingProblem, u0: Unknowns, tangent, cfg: ContinuationConfig):
    """Newton-Krylov corrector orthogonal to the tangent.

    Each Newton system is the bordered operator (DF on top, the tangent as
    last row) with right-hand side (-F, 0), solved matrix-free by GMRES to
    a forcing tolerance.  Raises NewtonError on stagnation, divergence, or
    an integration failure at the predicted point.
    """
    tangent = np.asarray(tangent, dtype=float)
    u = Unknowns.unpack(u0.pack(), u0.k, u0.n)
    N = problem.N
    max_inner = min(N, 3 * problem.k - 1 + cfg.gmres_extra)
    residuals = []
    gmres_iters = []
    for it in range(cfg.newton_max + 1):
        try:
            F = problem.residual(u)
        except OrbitContError as exc:
            raise NewtonError(f"residual evaluation failed: {exc}") from exc
        rnorm = float(np.linalg.norm(F))
        residuals.append(rnorm)
        if rnorm <= cfg.newton_tol:
            return ContinuationPoint(u, tangent.copy(), rnorm, residuals, gmres_iters)
        if it == cfg.newton_max:
            break
        if it >= 2 and residuals[-1] > 10.0 * residuals[-3]:
            raise NewtonError(f"Newton diverging (residual {rnorm:.3g})")
        inner_tol = cfg.gmres_tol if cfg.gmres_tol is not None else min(1e-3, rnorm)
        op = LinearOperator(N, lambda v: problem.jacobian_apply(u, tangent, v))
        rep = gmres(op, np.concatenate([-F, [0.0]]), tol=max(inner_tol, 1e-14),
                    max_iter=max_inner)
        gmres_iters.append(rep.iterations)
        dz = rep.solution
        # the border equation keeps the update orthogonal to the tangent
        ortho = abs(tangent @ dz) / max(1.0, np.linalg.norm(dz))
        if ortho > 1e-6:
            log.debug("corrector update tangent component %.3g", ortho)
        u = Unknowns.unpack(u.pack() + dz, u.k, u.n)
    raise NewtonError(
        f"no convergence in {cfg.newton_max} Newton iterations "
        f"(last residual {residuals[-1]:.3g})"
    )


def step_control(outcome, ds, cfg: ContinuationConfig):
    """Adapt the continuation step: halve on rejection, grow by 1.3 after
    fast (<= 3 iteration) convergence, hold otherwise."""
    if outcome == "rejected":
        ds = 0.5 * ds
        if ds < cfg.ds_min:
            raise ContinuationError(
                f"continuation step underflow (ds={ds:.3g} < ds_min={cfg.ds_min:.3g})"
            )
        return ds
    iters = outcome[1]
    if iters <= 3:
        return min(1.3 * ds, cfg.ds_max)
    return ds


def sample_orbit(problem: ShootingProblem, u: Unknowns, ns) -> MeshOrbit:
    """Resample a converged orbit at ``ns`` uniform arc-length stations."""
    trajs = problem.segment_trajectories(u, with_arclength=True)
    seg_arc = [t.arclength() for t in trajs]
    total_arc = float(sum(seg_arc))
    total_time = float(np.sum(u.times) * problem.left.time_scale)
    targets = np.linspace(0.0, total_arc, ns)
    samples = np.empty((ns, problem.n))
    seg = 0
    offset = 0.0
    for j, s in enumerate(targets):
        while seg < len(trajs) - 1 and s > offset + seg_arc[seg] + 1e-14:
            offset += seg_arc[seg]
            seg += 1
        samples[j] = _state_at_arc(trajs[seg], min(s - offset, seg_arc[seg]))
    return MeshOrbit(samples=samples, start=trajs[0].states[0].copy(),
                     par=u.par, total_time=total_time,
                     total_arclength=total_arc, unknowns=u)


def _state_at_arc(traj, s):
    """Invert the monotone arc-length quadrature by bisection on dense output."""
    col = traj._arc_col
    lo, hi = traj.times[0], traj.t_final
    if s <= 0.0:
        return traj.states[0]
    if s >= traj.ys[-1, col]:
        return traj.final_state
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if traj.dense_aug(mid)[col] < s:
            lo = mid
        else:
            hi = mid
    return traj.dense_aug(0.5 * (lo + hi))[: traj.n]


def manage_intervals(problem: ShootingProblem, u: Unknowns, cfg: ContinuationConfig,
                     step_index):
    """Split any shooting interval whose flow Jacobian amplification exceeds
    the threshold, at the interval's time midpoint.

    The first half gets a fixed-time condition at the midpoint; the second
    half keeps the character of the original condition with its target
    reduced by the first half's share, so the converged orbit stays an
    exact solution of the refined problem.  Returns
    (problem, unknowns, split_flags); ``split_flags[i]`` marks whether old
    interval i was split.
    """
    ts = problem.left.time_scale
    starts = problem._starts(u)
    amps = []
    for i in range(problem.k):
        seed = cfg.seed * 1_000_003 + step_index * 97 + i
        amps.append(segment_amplification(problem.field, starts[i],
                                          float(u.times[i] * ts), problem.cfg,
                                          probes=2, power_iters=1, seed=seed))
    no_split = [False] * problem.k
    if max(amps) <= cfg.amplification_threshold:
        return problem, u, no_split
    if problem.k >= cfg.max_intervals:
        log.warning("amplification %.3g above threshold but max_intervals=%d reached",
                    max(amps), cfg.max_intervals)
        return problem, u, no_split

    from .integrate import integrate

    new_bcs = []
    new_starts = []
    new_times = []
    split_flags = []
    for i in range(problem.k):
        bc = problem.right_bcs[i]
        T = float(u.times[i] * ts)
        if amps[i] <= cfg.amplification_threshold:
            new_bcs.append(bc)
            new_starts.append(starts[i])
            new_times.append(u.times[i])
            split_flags.append(False)
            continue
        split_flags.append(True)
        log.info("splitting interval %d (amplification %.3g)", i, amps[i])
        half = integrate(problem.field, starts[i], 0.5 * T, problem.cfg,
                         with_arclength=(bc.kind == "arclength"))
        mid = half.final_state
        new_bcs.append(BoundaryCondition.fixed_time(0.5 * T))
        new_starts.append(starts[i])
        new_times.append(0.5 * u.times[i])
        if bc.kind == FIXED_TIME:
            tail = BoundaryCondition.fixed_time(bc.target - 0.5 * T)
        elif bc.kind == "arclength":
            tail = BoundaryCondition.arclength(bc.target - half.arclength())
        else:
            tail = bc
        new_bcs.append(tail)
        new_starts.append(mid)
        new_times.append(0.5 * u.times[i])

    p2 = problem.with_bcs(new_bcs)
    interior = (np.array(new_starts[1:]) if len(new_starts) > 1
                else np.zeros((0, problem.n)))
    u2 = Unknowns(interior, np.array(new_times), u.par)
    return p2, u2, split_flags


def run(problem: ShootingProblem, cfg: ContinuationConfig, eps0=None, theta0=None,
        u0=None, tangent0=None, ds_init=None, step_offset=0, on_step=None,
        t_max_seed=100.0, par_ref=None) -> ContinuationRun:
    """Continue the BVP family and accumulate the manifold mesh.

    Start either from a fresh seed (``eps0`` / ``theta0``) or from a
    checkpointed state (``u0``/``tangent0``/``ds_init``/``step_offset``).
    ``on_step`` is called with a snapshot dict after every accepted step.
    """
    if u0 is None:
        u = problem.seed_initial_solution(eps0=eps0, theta0=theta0, t_max=t_max_seed)
    else:
        u = u0
    tangent = (initial_tangent(problem.N) if tangent0 is None
               else np.asarray(tangent0, dtype=float))
    ds = float(cfg.ds0 if ds_init is None else ds_init)

    mesh = ManifoldMesh(metadata={
        "field": problem.base_field.name,
        "params": problem.base_field.params,
        "mode": problem.left.kind,
        "k_initial": problem.k,
        "workers": problem.workers,
    })
    points: List[ContinuationPoint] = []
    diagram: List[dict] = []
    convergence: List[dict] = []
    timing: List[dict] = []
    stop_reason = "max_steps"

    def accept(step, pt, wall):
        points.append(pt)
        orbit = sample_orbit(problem, pt.unknowns, cfg.samples_per_orbit)
        mesh.orbits.append(orbit)
        is_po = problem.left.kind == PO_RAY
        diagram.append({
            "step": step,
            "par": pt.par,
            "eps": float(np.exp(pt.par)) if is_po else float("nan"),
            "total_time": orbit.total_time,
            "total_arclength": orbit.total_arclength,
            "k": problem.k,
            "ds": ds,
            "newton_iterations": len(pt.newton_residuals) - 1,
            "fold": int(pt.fold),
        })
        for j, r in enumerate(pt.newton_residuals):
            convergence.append({"step": step, "newton_iteration": j, "residual": r,
                                "gmres_iterations": (pt.gmres_iterations[j]
                                                     if j < len(pt.gmres_iterations)
                                                     else 0)})
        timing.append({"step": step, "wall_time": wall,
                       "segment_time": float(np.sum(problem.last_segment_times)),
                       "k": problem.k, "workers": problem.workers})

    def snapshot(step, pt):
        # the stored ds is the one the next step will be predicted with, so
        # a resumed run replays the uninterrupted run exactly
        if on_step is not None:
            on_step({"step": step, "unknowns": pt.unknowns, "tangent": pt.tangent,
                     "ds": ds, "par_ref": par0, "problem": problem, "mesh": mesh,
                     "diagram": diagram, "convergence": convergence,
                     "timing": timing})

    def refine_discretization(pt, new_tangent, step):
        """Interval management after an accepted point; returns the
        (possibly refined) problem, tangent and current point."""
        nonlocal problem
        problem2, u2, split_flags = manage_intervals(problem, pt.unknowns, cfg, step)
        if not any(split_flags):
            return new_tangent, pt
        problem = problem2
        t2 = _remap_tangent(new_tangent, pt.unknowns, split_flags)
        # re-converge the current orbit in the refined discretization so
        # the next secant has a same-size partner
        pt2 = correct(problem, u2, t2, cfg)
        pt2.fold = pt.fold
        points[-1] = pt2
        return t2, pt2

    # converge the seed itself (residual should already be near zero)
    t0 = _time.perf_counter()
    pt = correct(problem, u, tangent, cfg)
    par0 = pt.par if par_ref is None else float(par_ref)
    step = step_offset
    accept(step, pt, _time.perf_counter() - t0)
    snapshot(step, pt)
    tangent, prev = refine_discretization(pt, tangent, step)

    while step - step_offset < cfg.max_steps:
        step += 1
        # predict / correct with step rejection
        while True:
            pred = Unknowns.unpack(prev.unknowns.pack() + ds * tangent,
                                   problem.k, problem.n)
            t0 = _time.perf_counter()
            try:
                pt = correct(problem, pred, tangent, cfg)
                break
            except NewtonError as exc:
                log.info("step %d rejected at ds=%.3g: %s", step, ds, exc)
                ds = step_control("rejected", ds, cfg)
        wall = _time.perf_counter() - t0

        new_tangent = tangent_secant(pt.unknowns, prev.unknowns, tangent)
        pt.tangent = new_tangent
        pt.fold = bool(np.sign(new_tangent[-1]) != np.sign(tangent[-1])
                       and tangent[-1] != 0.0)
        if pt.fold:
            log.info("fold detected at step %d (par=%.6g)", step, pt.par)
        accept(step, pt, wall)

        if cfg.par_span is not None and abs(pt.par - par0) >= cfg.par_span:
            stop_reason = "par_span"
            break
        total_time = float(np.sum(pt.unknowns.times) * problem.left.time_scale)
        if cfg.max_total_time is not None and total_time >= cfg.max_total_time:
            stop_reason = "max_total_time"
            break

        ds = step_control(("converged", len(pt.newton_residuals) - 1), ds, cfg)
        snapshot(step, pt)
        tangent, prev = refine_discretization(pt, new_tangent, step)

    return ContinuationRun(mesh=mesh, points=points, diagram=diagram,
                           convergence=convergence, timing=timing,
                           problem=problem, stop_reason=stop_reason)


def _remap_tangent(tangent, u_old: Unknowns, split_flags):
    """Carry a tangent across interval splits: halve the time component of
    each split interval across its halves, seed new interior points with
    zeros, then renormalize.  The next converged pair replaces this with a
    true secant."""
    k_old, n = u_old.k, u_old.n
    dv = Unknowns.unpack(tangent, k_old, n)
    new_interior = []
    new_times = []
    for j in range(k_old):
        if j > 0:
            new_interior.append(dv.interior[j - 1])
        if split_flags[j]:
            new_times.extend([0.5 * dv.times[j], 0.5 * dv.times[j]])
            new_interior.append(np.zeros(n))
        else:
            new_times.append(dv.times[j])
    t = Unknowns(np.array(new_interior) if new_interior else np.zeros((0, n)),
                 np.array(new_times), dv.par).pack()
    nt = np.linalg.norm(t)
    return t / nt if nt > 0 else initial_tangent(len(t))
