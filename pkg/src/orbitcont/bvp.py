"""Multiple-shooting boundary value problem assembly.

Packs the continuation unknowns, evaluates the nonlinear residual (gluing
mismatches plus one scalar right boundary condition per shooting interval),
and provides matrix-free bordered Jacobian-vector products built from
extended-system integrations.  Segment integrations are independent and
are dispatched to a worker pool; the gather step is a fixed-order
reduction, so results do not depend on the worker count.
"""

import logging
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import List, Optional

import numpy as np

from .errors import OrbitContError
from .integrate import (
    ArclengthStop,
    EventStop,
    TimeStop,
    extended_trajectory,
    integrate,
    integrate_until,
)
from .stability import PeriodicOrbit

log = logging.getLogger("orbitcont")

FIXED_TIME = "fixed_time"
POINCARE = "poincare"
ARCLENGTH = "arclength"


@dataclass
class BoundaryCondition:
    """Scalar right boundary condition g(orbit, T) = target for one interval."""

    kind: str
    target: float
    normal: Optional[np.ndarray] = None

    @staticmethod
    def fixed_time(T):
        if T <= 0:
            raise ValueError("fixed integration time must be positive")
        return BoundaryCondition(FIXED_TIME, float(T))

    @staticmethod
    def poincare(normal, offset):
        normal = np.asarray(normal, dtype=float)
        nn = np.linalg.norm(normal)
        if nn == 0:
            raise ValueError("Poincare normal must be nonzero")
        # scale offset along with the normal so g is unchanged
        return BoundaryCondition(POINCARE, float(offset) / nn, normal / nn)

    @staticmethod
    def arclength(c):
        if c <= 0:
            raise ValueError("arc-length target must be positive")
        return BoundaryCondition(ARCLENGTH, float(c))

    def to_dict(self):
        d = {"kind": self.kind, "target": self.target}
        if self.normal is not None:
            d["normal"] = self.normal.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        if d["kind"] == POINCARE:
            return cls.poincare(d["normal"], d["target"])
        return cls(d["kind"], float(d["target"]))


PO_RAY = "po_ray"
EQ_CIRCLE = "eq_circle"


@dataclass
class LeftBoundary:
    """Left boundary condition: where orbits are born on the invariant object.

    ``po_ray``: gamma(0) = xbar + eps * u1 with eps = exp(par), par = ln eps.
    ``eq_circle``: gamma(0) on a circle of given radius in the unstable
    plane of an equilibrium; par is the angle.
    """

    kind: str
    po: Optional[PeriodicOrbit] = None
    u1_sign: int = 1
    eq_point: Optional[np.ndarray] = None
    eq_frame: Optional[np.ndarray] = None  # (n, 2), orthonormal columns
    radius: float = 0.0
    reverse_time: bool = False
    time_scale: float = 1.0

    @staticmethod
    def periodic_orbit(po: PeriodicOrbit, u1_sign=1, reverse_time=False):
        if po.mu1 is None or po.u1 is None:
            raise ValueError("periodic orbit lacks Floquet data (mu1, u1)")
        if not reverse_time and abs(po.mu1) <= 1.0:
            raise ValueError(
                f"|mu1|={abs(po.mu1):.6g} <= 1: no 2D unstable manifold "
                "(use reverse_time for stable manifolds)"
            )
        if reverse_time and abs(po.mu1) >= 1.0:
            raise ValueError("reverse_time requires |mu1| < 1")
        if u1_sign not in (1, -1):
            raise ValueError("u1_sign must be +1 or -1")
        return LeftBoundary(PO_RAY, po=po, u1_sign=u1_sign,
                            reverse_time=reverse_time, time_scale=po.period)

    @staticmethod
    def equilibrium(point, unstable_vectors, radius, time_scale=None,
                    rates=None, reverse_time=False):
        point = np.asarray(point, dtype=float)
        vecs = np.asarray(unstable_vectors, dtype=float)
        if vecs.shape != (point.shape[0], 2):
            raise ValueError("unstable_vectors must have shape (n, 2)")
        if radius <= 0:
            raise ValueError("radius must be positive")
        frame, _ = np.linalg.qr(vecs)
        if time_scale is None:
            if rates is None:
                raise ValueError("supply time_scale or the two unstable rates")
            l1, l2 = rates
            time_scale = 1.0 / np.sqrt(abs(l1) * abs(l2))
        return LeftBoundary(EQ_CIRCLE, eq_point=point, eq_frame=frame,
                            radius=float(radius), reverse_time=reverse_time,
                            time_scale=float(time_scale))

    def point(self, par):
        if self.kind == PO_RAY:
            return self.po.base_point + np.exp(par) * self.u1_sign * self.po.u1
        c, s = np.cos(par), np.sin(par)
        return self.eq_point + self.radius * (c * self.eq_frame[:, 0] + s * self.eq_frame[:, 1])

    def dpoint(self, par):
        """Derivative of the birth point with respect to the free parameter."""
        if self.kind == PO_RAY:
            return np.exp(par) * self.u1_sign * self.po.u1
        c, s = np.cos(par), np.sin(par)
        return self.radius * (-s * self.eq_frame[:, 0] + c * self.eq_frame[:, 1])


@dataclass
class Unknowns:
    """Continuation state z = (interior points, normalized times, parameter)."""

    interior: np.ndarray  # (k-1, n)
    times: np.ndarray  # (k,), normalized by the left boundary time scale
    par: float  # delta = ln(eps), or the angle theta

    def __post_init__(self):
        interior = np.asarray(self.interior, dtype=float)
        if interior.ndim == 1 and interior.size > 0:
            interior = interior[None, :]
        self.interior = interior
        self.times = np.asarray(self.times, dtype=float)
        if self.interior.ndim != 2:
            raise ValueError("interior must be a (k-1, n) array")

    @property
    def k(self):
        return len(self.times)

    @property
    def n(self):
        return self.interior.shape[1]

    @property
    def N(self):
        k = self.k
        return (k - 1) * self.interior.shape[1] + k + 1

    def pack(self):
        return np.concatenate([self.interior.ravel(), self.times, [self.par]])

    @classmethod
    def unpack(cls, z, k, n):
        z = np.asarray(z, dtype=float)
        ni = (k - 1) * n
        if z.shape != (ni + k + 1,):
            raise ValueError(f"expected length {ni + k + 1}, got {z.shape}")
        return cls(z[:ni].reshape(k - 1, n) if k > 1 else np.zeros((0, n)),
                   z[ni : ni + k].copy(), float(z[-1]))

    def to_dict(self):
        return {"interior": self.interior.tolist(), "times": self.times.tolist(),
                "par": self.par, "n": self.n}

    @classmethod
    def from_dict(cls, d):
        n = int(d["n"])
        interior = np.array(d["interior"], dtype=float).reshape(-1, n)
        return cls(interior, np.array(d["times"], dtype=float), float(d["par"]))


class ShootingProblem:
    """k-interval shooting discretization of the manifold BVP.

    ``jvp_mode`` selects exact directional derivatives through variational
    integration (default) or a central finite difference of the residual
    (cross-validation mode).
    """

    def __init__(self, field, left: LeftBoundary, right_bcs: List[BoundaryCondition],
                 cfg, workers=1, dense_limit=2000, jvp_mode="variational"):
        if jvp_mode not in ("variational", "fd"):
            raise ValueError("jvp_mode must be 'variational' or 'fd'")
        self.base_field = field
        self.field = field.reversed() if left.reverse_time else field
        self.left = left
        self.right_bcs = list(right_bcs)
        self.cfg = cfg
        self.workers = max(1, int(workers))
        self.dense_limit = dense_limit
        self.jvp_mode = jvp_mode
        self._pool = None
        self.last_segment_times = []

    @property
    def k(self):
        return len(self.right_bcs)

    @property
    def n(self):
        return self.field.dim

    @property
    def N(self):
        return (self.k - 1) * self.n + self.k + 1

    def with_bcs(self, right_bcs):
        return ShootingProblem(self.base_field, self.left, right_bcs, self.cfg,
                               workers=self.workers, dense_limit=self.dense_limit,
                               jvp_mode=self.jvp_mode)

    # -- segment bookkeeping -------------------------------------------------

    def _check(self, u: Unknowns):
        if u.k != self.k:
            raise ValueError(f"unknowns have k={u.k}, problem has k={self.k}")
        if u.N != self.N:
            raise ValueError("unknown vector has wrong dimension")
        if np.any(u.times <= 0.0):
            raise OrbitContError("nonpositive integration time in unknowns")

    def _starts(self, u: Unknowns):
        starts = [self.left.point(u.par)]
        for i in range(self.k - 1):
            starts.append(u.interior[i])
        return starts

    def _map(self, tasks):
        """Run segment tasks, in parallel when configured; fixed-order gather."""
        if self.workers == 1 or len(tasks) == 1:
            return [t() for t in tasks]
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=min(self.workers, self.k))
        futures = [self._pool.submit(t) for t in tasks]
        return [f.result() for f in futures]

    # -- residual ------------------------------------------------------------

    def residual(self, u: Unknowns):
        """F(z): (k-1) n gluing mismatches then k boundary-condition values."""
        self._check(u)
        starts = self._starts(u)
        ts = self.left.time_scale

        def seg_task(i):
            def task():
                t0 = _time.perf_counter()
                with_arc = self.right_bcs[i].kind == ARCLENGTH
                T = u.times[i] * ts
                traj = integrate(self.field, starts[i], T, self.cfg,
                                 with_arclength=with_arc)
                end = traj.final_state
                bc = self.right_bcs[i]
                if bc.kind == FIXED_TIME:
                    val = T - bc.target
                elif bc.kind == POINCARE:
                    val = bc.normal @ end - bc.target
                else:
                    val = traj.arclength() - bc.target
                return end, val, _time.perf_counter() - t0
            return task

        results = self._map([seg_task(i) for i in range(self.k)])
        self.last_segment_times = [r[2] for r in results]

        glue = []
        for i in range(self.k - 1):
            glue.append(u.interior[i] - results[i][0])
        bc_rows = [r[1] for r in results]
        parts = glue + [np.asarray(bc_rows)]
        return np.concatenate(parts) if glue else np.asarray(bc_rows)

    # -- Jacobian-vector product ----------------------------------------------

    def jacobian_apply(self, u: Unknowns, tangent, v):
        """Bordered product A v: (DF v, tangent . v), length N."""
        self._check(u)
        tangent = np.asarray(tangent, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.jvp_mode == "fd":
            dF = self._fd_directional(u, v)
        else:
            dF = self._variational_directional(u, v)
        return np.concatenate([dF, [tangent @ v]])

    def _fd_directional(self, u, v):
        z = u.pack()
        h = 1e-6 * (1.0 + np.linalg.norm(z))
        up = Unknowns.unpack(z + h * v, self.k, self.n)
        um = Unknowns.unpack(z - h * v, self.k, self.n)
        return (self.residual(up) - self.residual(um)) / (2.0 * h)

    def _variational_directional(self, u, v):
        k, n = self.k, self.n
        ts = self.left.time_scale
        dv = Unknowns.unpack(v, k, n)
        starts = self._starts(u)
        vstarts = [self.left.dpoint(u.par) * dv.par]
        for i in range(k - 1):
            vstarts.append(dv.interior[i])

        def seg_task(i):
            def task():
                with_arc = self.right_bcs[i].kind == ARCLENGTH
                T = u.times[i] * ts
                traj = extended_trajectory(self.field, starts[i], vstarts[i], T,
                                           self.cfg, with_arclength=with_arc)
                end = traj.final_state
                w = traj.final_variational
                f_end = traj.fs[-1, :n]
                # endpoint variation: Dphi v_start + f(end) dT
                E = w + f_end * (ts * dv.times[i])
                bc = self.right_bcs[i]
                if bc.kind == FIXED_TIME:
                    dbc = ts * dv.times[i]
                elif bc.kind == POINCARE:
                    dbc = bc.normal @ E
                else:
                    arcdir = traj.ys[-1, 2 * n + 1]
                    dbc = arcdir + np.linalg.norm(f_end) * (ts * dv.times[i])
                return E, dbc
            return task

        results = self._map([seg_task(i) for i in range(k)])
        glue = []
        for i in range(k - 1):
            glue.append(dv.interior[i] - results[i][0])
        bc_rows = [r[1] for r in results]
        parts = glue + [np.asarray(bc_rows)]
        return np.concatenate(parts) if glue else np.asarray(bc_rows)

    # -- dense oracle ----------------------------------------------------------

    def assemble_dense(self, u: Unknowns, tangent):
        """Column-probe the matrix-free bordered operator into a dense N x N
        matrix (test oracle; refuses above ``dense_limit``)."""
        N = self.N
        if N > self.dense_limit:
            raise ValueError(f"N={N} exceeds dense_limit={self.dense_limit}")
        cols = []
        for j in range(N):
            e = np.zeros(N)
            e[j] = 1.0
            cols.append(self.jacobian_apply(u, tangent, e))
        return np.column_stack(cols)

    # -- seeding ---------------------------------------------------------------

    def seed_initial_solution(self, eps0=None, theta0=None, t_max=100.0):
        """Initial solution by forward integration from the left boundary,
        chopping the trajectory at each successive right-BC event."""
        if self.left.kind == PO_RAY:
            if eps0 is None or eps0 <= 0:
                raise ValueError("eps0 must be positive (delta = ln eps)")
            par = float(np.log(eps0))
        else:
            if theta0 is None:
                raise ValueError("theta0 required for equilibrium mode")
            par = float(theta0)

        x = self.left.point(par)
        starts = []
        times = []
        for i, bc in enumerate(self.right_bcs):
            starts.append(x)
            if bc.kind == FIXED_TIME:
                stop = TimeStop(bc.target)
            elif bc.kind == POINCARE:
                w, c = bc.normal, bc.target
                stop = EventStop(lambda state, w=w, c=c: w @ state - c)
            else:
                stop = ArclengthStop(bc.target)
            traj, t_hit = integrate_until(self.field, x, stop, self.cfg, t_max)
            times.append(t_hit / self.left.time_scale)
            # land the chop point with full integrator accuracy (the event
            # endpoint itself is dense-output interpolated)
            x = integrate(self.field, x, t_hit, self.cfg).final_state
        interior = (np.array(starts[1:]) if self.k > 1
                    else np.zeros((0, self.n)))
        return Unknowns(interior, np.array(times), par)

    # -- orbit reconstruction ---------------------------------------------------

    def segment_trajectories(self, u: Unknowns, with_arclength=True):
        """Integrate all segments of a (converged) solution for export."""
        self._check(u)
        starts = self._starts(u)
        ts = self.left.time_scale

        def seg_task(i):
            def task():
                return integrate(self.field, starts[i], u.times[i] * ts, self.cfg,
                                 with_arclength=with_arclength)
            return task

        return self._map([seg_task(i) for i in range(self.k)])


def bc_value_and_gradient(bc: BoundaryCondition, segment, field, cfg):
    """Value, gradient w.r.t. the segment's initial point, and time
    derivative of a right boundary condition (diagnostic; the gradient
    costs n extended integrations)."""
    n = field.dim
    x0 = segment.states[0]
    T = segment.t_final
    end = segment.final_state
    f_end = field(end)
    if bc.kind == FIXED_TIME:
        return T, np.zeros(n), 1.0
    if bc.kind == POINCARE:
        grad = np.empty(n)
        for j in range(n):
            e = np.zeros(n)
            e[j] = 1.0
            traj = extended_trajectory(field, x0, e, T, cfg)
            grad[j] = bc.normal @ traj.final_variational
        return float(bc.normal @ end - bc.target), grad, float(bc.normal @ f_end)
    # arc length
    base = integrate(field, x0, T, cfg, with_arclength=True)
    value = base.arclength()
    grad = np.empty(n)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        traj = extended_trajectory(field, x0, e, T, cfg, with_arclength=True)
        grad[j] = traj.ys[-1, 2 * n + 1]
    return float(value), grad, float(np.linalg.norm(f_end))
