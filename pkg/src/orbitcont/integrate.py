"""Adaptive time integration with dense output and event location.

Wraps the Dormand-Prince kernels in :mod:`orbitcont.kernels` with
trajectory objects (cubic-Hermite dense output), extended (variational)
integration and event-terminated integration.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import backend, kernels
from .errors import (
    IntegrationError,
    NoEventError,
    NonFiniteStateError,
    StepUnderflowError,
)
from .fields import VectorField

log = logging.getLogger("orbitcont")

_EMPTY = np.zeros(0)
_EMPTY2 = np.zeros((0, 0))
_EMPTY3 = np.zeros((0, 0, 0))


@dataclass
class IntegratorConfig:
    """Tolerances and limits for the embedded RK5(4) integrator."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = np.inf
    method: str = "dp54"
    event_tol: float = 1e-10
    max_nodes: int = 1_000_000

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be strictly positive")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")


class Trajectory:
    """Integration result with cubic-Hermite dense output.

    Nodes are the accepted integrator steps; ``states`` is the base-state
    part, the augmented columns (variational state, arc length) are kept
    alongside and interpolated with the same rule.
    """

    def __init__(self, n, times, ys, fs, with_var=False, with_arc=False):
        self.n = n
        self.times = times
        self.ys = ys
        self.fs = fs
        self.with_var = with_var
        self.with_arc = with_arc
        self.grazing = False

    @property
    def states(self):
        return self.ys[:, : self.n]

    @property
    def t_final(self):
        return self.times[-1]

    @property
    def final_state(self):
        return self.ys[-1, : self.n].copy()

    @property
    def final_variational(self):
        if not self.with_var:
            raise AttributeError("trajectory carries no variational state")
        return self.ys[-1, self.n : 2 * self.n].copy()

    @property
    def _arc_col(self):
        return 2 * self.n if self.with_var else self.n

    def arclength(self, t=None):
        """Accumulated arc length at time t (default: final time)."""
        if not self.with_arc:
            raise AttributeError("trajectory carries no arc-length state")
        if t is None:
            return self.ys[-1, self._arc_col]
        return self.dense_aug(t)[self._arc_col]

    def dense_aug(self, t):
        """Interpolate the full augmented state at scalar time t."""
        ts = self.times
        if t < ts[0] - 1e-12 or t > ts[-1] + 1e-12:
            raise ValueError(f"t={t} outside [{ts[0]}, {ts[-1]}]")
        # exact node hit returns the stored value
        i = np.searchsorted(ts, t)
        if i < len(ts) and ts[i] == t:
            return self.ys[i].copy()
        if len(ts) == 1:
            return self.ys[0].copy()
        i = min(max(np.searchsorted(ts, t, side="right") - 1, 0), len(ts) - 2)
        t0, t1 = ts[i], ts[i + 1]
        h = t1 - t0
        th = (t - t0) / h
        h00 = (1.0 + 2.0 * th) * (1.0 - th) ** 2
        h10 = th * (1.0 - th) ** 2
        h01 = th * th * (3.0 - 2.0 * th)
        h11 = th * th * (th - 1.0)
        return (
            h00 * self.ys[i]
            + h * h10 * self.fs[i]
            + h01 * self.ys[i + 1]
            + h * h11 * self.fs[i + 1]
        )

    def dense_eval(self, t):
        """Interpolated base state at time t (scalar or array)."""
        if np.ndim(t) == 0:
            return self.dense_aug(float(t))[: self.n]
        return np.array([self.dense_aug(float(ti))[: self.n] for ti in np.asarray(t)])

    def truncated(self, t_hit, f_hit):
        """New trajectory cut at t_hit, appending a dense-output node there."""
        keep = self.times < t_hit - 1e-14 * max(1.0, abs(t_hit))
        m = int(np.sum(keep))
        times = np.concatenate([self.times[:m], [t_hit]])
        ys = np.vstack([self.ys[:m], self.dense_aug(t_hit)])
        fs = np.vstack([self.fs[:m], f_hit])
        return Trajectory(self.n, times, ys, fs, self.with_var, self.with_arc)


# ---------------------------------------------------------------------------
# stop conditions for integrate_until

@dataclass
class EventStop:
    """Stop at the first zero crossing of a scalar event function g(x)."""

    g: Callable[[np.ndarray], float]


@dataclass
class ArclengthStop:
    """Stop when the accumulated arc length reaches ``target``."""

    target: float


@dataclass
class TimeStop:
    """Stop when the elapsed time reaches ``target``."""

    target: float


StopCondition = Union[EventStop, ArclengthStop, TimeStop]


# ---------------------------------------------------------------------------

def _generic_pack(field: VectorField):
    ev = field.eval
    ja = field.jac_action

    def f(x, b, L, Q, scal, out):
        out[:] = ev(x)

    def jvp(x, v, b, L, Q, scal, out):
        out[:] = ja(x, v)

    return f, jvp, _EMPTY, _EMPTY2, _EMPTY3, _EMPTY


def _run(field, y0, t_final, cfg, with_var, with_arc):
    n = field.dim
    use_jit = backend.USE_NUMBA and field.kernels is not None
    if use_jit:
        kp = field.kernels
        f, jvp, b, L, Q, scal = kp.f, kp.jvp, kp.b, kp.L, kp.Q, kp.scal
    else:
        f, jvp, b, L, Q, scal = _generic_pack(field)
    status, ts, ys, fs = kernels.run_propagate(
        use_jit, f, jvp, b, L, Q, scal,
        np.asarray(y0, dtype=float), float(t_final),
        cfg.rel_tol, cfg.abs_tol, float(cfg.max_step),
        n, with_var, with_arc, cfg.max_nodes,
    )
    if status == kernels.STEP_UNDERFLOW:
        raise StepUnderflowError(
            f"step size underflow at t={ts[-1]:.6g} (stiffness beyond the explicit method)"
        )
    if status == kernels.NONFINITE:
        raise NonFiniteStateError(f"non-finite state at t={ts[-1]:.6g} (blow-up)")
    if status == kernels.TOO_MANY_STEPS:
        raise IntegrationError(f"exceeded max_nodes={cfg.max_nodes}")
    return Trajectory(n, ts, ys, fs, with_var=with_var, with_arc=with_arc)


def _check_initial(field, x0, t_final):
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (field.dim,):
        raise ValueError(f"x0 must have length {field.dim}, got shape {x0.shape}")
    if t_final < 0:
        raise ValueError("t_final must be nonnegative")
    return x0


def integrate(field, x0, t_final, cfg, with_arclength=False):
    """Integrate x' = f(x) from x0 over [0, t_final]."""
    x0 = _check_initial(field, x0, t_final)
    y0 = np.concatenate([x0, [0.0]]) if with_arclength else x0
    return _run(field, y0, t_final, cfg, with_var=False, with_arc=with_arclength)


def extended_trajectory(field, x0, v0, t_final, cfg, with_arclength=False):
    """Integrate the extended system (state + variational direction)."""
    x0 = _check_initial(field, x0, t_final)
    v0 = np.asarray(v0, dtype=float)
    if v0.shape != (field.dim,):
        raise ValueError(f"v0 must have length {field.dim}")
    parts = [x0, v0]
    if with_arclength:
        parts.append([0.0, 0.0])
    return _run(field, np.concatenate(parts), t_final, cfg,
                with_var=True, with_arc=with_arclength)


def integrate_extended(field, x0, v0, t_final, cfg):
    """Return (phi(x0, t), Dphi(x0, t) v0) at t = t_final."""
    traj = extended_trajectory(field, x0, v0, t_final, cfg)
    return traj.final_state, traj.final_variational


def _event_fun(traj, stop):
    if isinstance(stop, EventStop):
        return lambda t: float(stop.g(traj.dense_aug(t)[: traj.n]))
    if isinstance(stop, ArclengthStop):
        col = traj._arc_col
        return lambda t: float(traj.dense_aug(t)[col] - stop.target)
    raise TypeError(f"unsupported stop condition {stop!r}")


def integrate_until(field, x0, stop, cfg, t_max):
    """Integrate until the stop condition fires; return (Trajectory, T_hit).

    The hit time is located on the dense output by bisection bracketing
    followed by secant refinement, to ``cfg.event_tol`` in the event
    function.  A grazing hit (event-function slope along the flow below
    threshold) sets ``Trajectory.grazing`` and logs a warning.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    x0 = _check_initial(field, x0, 0.0)

    if isinstance(stop, TimeStop):
        if stop.target > t_max:
            raise NoEventError(f"time target {stop.target} beyond t_max={t_max}")
        traj = integrate(field, x0, stop.target, cfg)
        return traj, stop.target

    with_arc = isinstance(stop, ArclengthStop)
    traj = integrate(field, x0, t_max, cfg, with_arclength=with_arc)
    G = _event_fun(traj, stop)

    bracket = _find_bracket(traj, G, cfg)
    if bracket is None:
        raise NoEventError(f"no stop event in [0, {t_max}]")
    t_hit = _refine_root(G, *bracket, cfg.event_tol)

    # grazing diagnostic: dG/dt along the flow at the hit
    dt = 1e-7 * max(1.0, t_hit)
    lo, hi = max(t_hit - dt, 0.0), min(t_hit + dt, traj.t_final)
    slope = (G(hi) - G(lo)) / (hi - lo) if hi > lo else 0.0
    scale = max(1.0, abs(np.linalg.norm(field(traj.dense_eval(t_hit)))))
    grazing = abs(slope) < 1e-6 * scale

    f_hit = _aug_deriv(field, traj, t_hit)
    out = traj.truncated(t_hit, f_hit)
    out.grazing = grazing
    if grazing:
        log.warning("grazing event at t=%.8g (|dg/dt|=%.3g)", t_hit, abs(slope))
    return out, t_hit


def _aug_deriv(field, traj, t):
    y = traj.dense_aug(t)
    n = traj.n
    out = np.empty_like(y)
    out[:n] = field(y[:n])
    idx = n
    if traj.with_var:
        out[n : 2 * n] = field.jac_action(y[:n], y[n : 2 * n])
        idx = 2 * n
    if traj.with_arc:
        out[idx] = np.linalg.norm(out[:n])
    return out


def _find_bracket(traj, G, cfg, subsamples=8):
    """First sign-change bracket of G on the dense output.

    Each accepted step is subsampled so crossings inside a single step are
    not missed.  If G starts within event tolerance of zero, the search
    starts once |G| has lifted off.
    """
    ts = traj.times
    lifted = abs(G(ts[0])) > 10.0 * cfg.event_tol
    t_prev = ts[0]
    g_prev = G(t_prev)
    for i in range(len(ts) - 1):
        grid = np.linspace(ts[i], ts[i + 1], subsamples + 1)[1:]
        for t in grid:
            g = G(t)
            if not lifted:
                if abs(g) > 10.0 * cfg.event_tol:
                    lifted = True
            elif g_prev == 0.0 or g == 0.0 or (g_prev < 0) != (g < 0):
                return t_prev, t
            t_prev, g_prev = t, g
    return None


def _refine_root(G, ta, tb, tol):
    ga, gb = G(ta), G(tb)
    if ga == 0.0:
        return ta
    if gb == 0.0:
        return tb
    # bisection to a tight bracket
    for _ in range(80):
        tm = 0.5 * (ta + tb)
        gm = G(tm)
        if gm == 0.0:
            return tm
        if (ga < 0) != (gm < 0):
            tb, gb = tm, gm
        else:
            ta, ga = tm, gm
        if abs(gm) <= tol or tb - ta < 1e-15 * max(1.0, abs(tb)):
            break
    # secant polish
    t0, g0, t1, g1 = ta, ga, tb, gb
    for _ in range(10):
        if g1 == g0:
            break
        t2 = t1 - g1 * (t1 - t0) / (g1 - g0)
        if not (min(ta, tb) <= t2 <= max(ta, tb)):
            break
        g2 = G(t2)
        t0, g0, t1, g1 = t1, g1, t2, g2
        if abs(g2) <= tol:
            return t2
    return 0.5 * (ta + tb) if abs(G(0.5 * (ta + tb))) < abs(g1) else t1
