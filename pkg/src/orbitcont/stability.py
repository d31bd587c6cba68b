"""Periodic-orbit refinement and matrix-free Floquet analysis.

Supplies the data anchoring the left boundary condition of the manifold
BVP: a refined periodic point, its period, and the leading Floquet pair
(mu1, u1) of the monodromy matrix, all through matrix-free monodromy
actions (extended-system integrations over one period).
"""

import logging
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .errors import FloquetError, NewtonError
from .integrate import integrate, integrate_extended
from .krylov import LinearOperator, arnoldi, gmres

log = logging.getLogger("orbitcont")


@dataclass
class PeriodicOrbit:
    """A periodic solution x = phi(x, P), with optional leading Floquet data."""

    base_point: np.ndarray
    period: float
    mu1: Optional[float] = None
    u1: Optional[np.ndarray] = None
    residual: float = np.nan
    newton_residuals: list = dc_field(default_factory=list)

    def __post_init__(self):
        self.base_point = np.asarray(self.base_point, dtype=float)
        if self.period <= 0:
            raise ValueError("period must be positive")
        if self.u1 is not None:
            self.u1 = np.asarray(self.u1, dtype=float)

    def to_dict(self):
        d = {
            "base_point": self.base_point.tolist(),
            "period": self.period,
            "residual": None if np.isnan(self.residual) else self.residual,
        }
        if self.mu1 is not None:
            d["mu1"] = self.mu1
        if self.u1 is not None:
            d["u1"] = self.u1.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            base_point=np.array(d["base_point"], dtype=float),
            period=float(d["period"]),
            mu1=d.get("mu1"),
            u1=None if d.get("u1") is None else np.array(d["u1"], dtype=float),
            residual=np.nan if d.get("residual") is None else float(d["residual"]),
        )


def monodromy_action(po: PeriodicOrbit, v, field, cfg):
    """Apply the monodromy matrix M = Dphi(xbar, P) to a direction."""
    v = np.asarray(v, dtype=float)
    if np.linalg.norm(v) == 0.0:
        raise ValueError("direction must be nonzero")
    _, w = integrate_extended(field, po.base_point, v, po.period, cfg)
    return w


def _fix_sign(u):
    """Sign convention: first component of magnitude > 1e-12 made positive."""
    for c in u:
        if abs(c) > 1e-12:
            return u if c > 0 else -u
    return u


def _ritz_pairs(apply_op, v0, m):
    V, H = arnoldi(apply_op, v0, m)
    k = H.shape[1]
    if k == 0:
        return np.zeros(0), np.zeros((len(v0), 0))
    vals, vecs = np.linalg.eig(H[:k, :k])
    order = np.argsort(-np.abs(vals))
    return vals[order], V @ vecs[:, order]


def leading_floquet(po: PeriodicOrbit, field, cfg, eig_tol=1e-8, max_dim=30, seed=0):
    """Dominant Floquet pair (mu1, u1) by Arnoldi on the monodromy action.

    The trivial multiplier-one direction f(xbar) is deflated by restricting
    the operator to its orthogonal complement; since f(xbar) is an exact
    eigenvector of M, this removes exactly the trivial eigenvalue and the
    remaining spectrum (mu1 included) is unchanged.  A degenerate or
    complex leading multiplier raises FloquetError carrying the Ritz
    values.
    """
    n = field.dim
    xbar = po.base_point
    fq = field(xbar)
    nf = np.linalg.norm(fq)
    q = fq / nf if nf > 1e-12 else None

    def raw(v):
        return monodromy_action(po, v, field, cfg)

    if q is None:
        apply_op = raw
    else:
        def apply_op(v):
            w = v - q * (q @ v)
            w = raw(w)
            return w - q * (q @ w)

    rng = np.random.default_rng(seed)
    m = min(max_dim, n)
    last_ritz = None
    for trial in range(2):
        v0 = rng.standard_normal(n)
        if q is not None:
            v0 -= q * (q @ v0)
        vals, vecs = _ritz_pairs(apply_op, v0, m)
        # drop the near-zero eigenvalues introduced by the projection
        keep = np.abs(vals) > 1e-10 * (np.abs(vals).max() if len(vals) else 1.0)
        vals, vecs = vals[keep], vecs[:, keep]
        if len(vals) == 0:
            raise FloquetError("Arnoldi produced no usable Ritz values", ritz_values=[])
        mu = vals[0]
        if abs(mu.imag) > eig_tol * abs(mu):
            raise FloquetError(
                f"leading multiplier is complex ({mu:.6g}); no real leading pair",
                ritz_values=vals.tolist(),
            )
        mu1 = float(mu.real)
        w = np.real(vecs[:, 0])
        if q is not None and abs(mu1 - 1.0) > 1e-8:
            # lift back from the deflated complement: u1 = w + s q with
            # s = q.M w / (mu1 - 1)
            s = float(q @ raw(w)) / (mu1 - 1.0)
            w = w + s * q
        u1 = _fix_sign(w / np.linalg.norm(w))
        res = np.linalg.norm(raw(u1) - mu1 * u1)
        if trial == 0:
            first = (mu1, u1, res)
            last_ritz = vals
            continue
        # second random start: detect a defective / multiple leading value
        mu1_a, u1_a, res_a = first
        if abs(mu1 - mu1_a) <= 1e-6 * max(1.0, abs(mu1_a)) and abs(u1 @ u1_a) < 0.9:
            raise FloquetError(
                f"leading multiplier {mu1_a:.8g} appears with multiplicity > 1",
                ritz_values=np.concatenate([last_ritz, vals]).tolist(),
            )
        mu1, u1, res = (mu1_a, u1_a, res_a) if res_a <= res else (mu1, u1, res)
    if res > eig_tol * abs(mu1):
        raise FloquetError(
            f"Floquet residual {res:.3g} above eig_tol*|mu1|={eig_tol * abs(mu1):.3g}",
            ritz_values=last_ritz.tolist(),
        )
    return mu1, u1


def refine_periodic_orbit(guess_point, guess_period, field, cfg, po_tol=None,
                          max_newton=20, gmres_tol=1e-8):
    """Newton-Krylov refinement of a periodic orbit guess.

    Solves phi(x, P) - x = 0 with the Poincare phase condition
    f(x_guess) . (x - x_guess) = 0 anchored at the guess.  The (n+1)
    dimensional bordered Newton systems are solved matrix-free by GMRES.
    """
    x = np.asarray(guess_point, dtype=float).copy()
    P = float(guess_period)
    n = field.dim
    if po_tol is None:
        po_tol = 1e-9 * (1.0 + np.linalg.norm(x))
    fg = field(x)
    if np.linalg.norm(fg) < 1e-12:
        raise NewtonError("phase condition degenerate: f(guess) is zero")
    x_anchor = x.copy()

    residuals = []
    for it in range(max_newton):
        end = integrate(field, x, P, cfg).final_state
        R = np.concatenate([end - x, [fg @ (x - x_anchor)]])
        rnorm = np.linalg.norm(R)
        residuals.append(rnorm)
        if rnorm <= po_tol:
            return PeriodicOrbit(base_point=x, period=P, residual=rnorm,
                                 newton_residuals=residuals)
        if it >= 2 and residuals[-1] > 10.0 * residuals[-3]:
            raise NewtonError(
                f"periodic-orbit Newton diverging (residual {rnorm:.3g})"
            )

        f_end = field(end)

        def apply_op(u):
            v, dP = u[:n], u[n]
            _, w = integrate_extended(field, x, v, P, cfg)
            return np.concatenate([w - v + f_end * dP, [fg @ v]])

        rep = gmres(LinearOperator(n + 1, apply_op), -R,
                    tol=max(gmres_tol, 1e-14), max_iter=n + 1)
        if not rep.converged:
            log.warning("inner GMRES stalled at %.3g in orbit refinement",
                        rep.residual_history[-1])
        x = x + rep.solution[:n]
        P = P + rep.solution[n]
        if P <= 0:
            raise NewtonError("period went nonpositive during refinement")
    raise NewtonError(
        f"no convergence in {max_newton} Newton iterations "
        f"(last residual {residuals[-1]:.3g})"
    )


def segment_amplification(field, x0, T, cfg, probes=3, power_iters=1, seed=0):
    """Estimate |Dphi(x0, T)|_2 by random probes plus power iteration.

    Each probe costs one extended integration; each power step reapplies
    the flow Jacobian to the normalized previous image, converging toward
    the dominant direction.  Returns the largest amplification seen, a
    lower bound on the true 2-norm.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    if T == 0:
        return 1.0
    x0 = np.asarray(x0, dtype=float)
    rng = np.random.default_rng(seed)
    n = field.dim
    best = 0.0
    for _ in range(probes):
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        for _ in range(1 + power_iters):
            _, w = integrate_extended(field, x0, v, T, cfg)
            g = np.linalg.norm(w)
            best = max(best, g)
            if g == 0.0:
                break
            v = w / g
    return best
