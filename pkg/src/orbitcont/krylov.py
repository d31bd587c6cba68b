"""Matrix-free GMRES with Householder orthogonalization.

Full (unrestarted, unpreconditioned) GMRES; the Krylov basis is built with
Householder reflections rather than modified Gram-Schmidt, which keeps the
basis orthogonal to machine precision even for severely ill-conditioned
operators.  A plain Householder Arnoldi factorization is exposed for the
Floquet eigensolver.
"""

from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np


@dataclass
class LinearOperator:
    """Matrix-free linear operator on R^dim."""

    dim: int
    apply: Callable[[np.ndarray], np.ndarray]

    def as_dense(self):
        cols = [self.apply(e) for e in np.eye(self.dim)]
        return np.array(cols).T


@dataclass
class GmresReport:
    solution: np.ndarray
    residual_history: List[float]
    iterations: int
    converged: bool
    breakdown: bool = False


@dataclass
class IterationBoundReport:
    """Outcome of checking the 3k-1 Krylov-dimension bound on a
    multiple-shooting operator (reported, never asserted)."""

    k: int
    limit: int
    iterations: int
    relative_residual: float
    bound_held: bool
    history: List[float] = field(default_factory=list)


def _house_vec(z, p):
    """Unit Householder vector w with (I - 2 w w^T) z = (z[:p], alpha, 0...).

    Returns (w, alpha); w is None when z[p:] is already reduced.
    """
    tail = z[p:]
    sigma = np.linalg.norm(tail)
    if sigma == 0.0:
        return None, 0.0
    alpha = -sigma if z[p] >= 0.0 else sigma
    w = np.zeros_like(z)
    w[p:] = tail
    w[p] -= alpha
    nw = np.linalg.norm(w)
    if nw == 0.0:
        return None, alpha
    return w / nw, alpha


def _reflect(w, z):
    return z - 2.0 * w * (w @ z)


def gmres(op: LinearOperator, rhs, tol, max_iter) -> GmresReport:
    """Solve op x = rhs by full GMRES from x0 = 0.

    Stops when the residual relative to ||rhs|| drops below ``tol``.  On a
    lucky breakdown the exact solution is returned; if ``max_iter`` is
    exhausted the best iterate is returned with ``converged=False``.
    """
    N = op.dim
    if max_iter > N:
        raise ValueError(f"max_iter={max_iter} exceeds operator dimension {N}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    rhs = np.asarray(rhs, dtype=float)
    if not np.all(np.isfinite(rhs)):
        raise ValueError("rhs must be finite")
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return GmresReport(np.zeros(N), [0.0], 0, True)

    W: List[np.ndarray] = []  # householder vectors
    V: List[np.ndarray] = []  # orthonormal basis vectors
    R = np.zeros((max_iter, max_iter))  # triangularized Hessenberg
    g = np.zeros(max_iter + 1)
    cs = np.zeros(max_iter)
    sn = np.zeros(max_iter)
    history = [1.0]

    z = rhs.copy()
    j = 0
    converged = False
    breakdown = False
    niter = 0
    while True:
        w, _ = _house_vec(z, j)
        if w is not None:
            z = _reflect(w, z)
        W.append(w)
        if j == 0:
            g[0] = z[0]
        else:
            col = j - 1
            # at j == N the Hessenberg column has no subdiagonal entry
            h = np.zeros(j + 1)
            h[: min(j + 1, N)] = z[: min(j + 1, N)]
            for i in range(col):
                hi, hi1 = h[i], h[i + 1]
                h[i] = cs[i] * hi + sn[i] * hi1
                h[i + 1] = -sn[i] * hi + cs[i] * hi1
            sub = h[j]
            r = np.hypot(h[col], sub)
            if r == 0.0:
                cs[col], sn[col] = 1.0, 0.0
            else:
                cs[col], sn[col] = h[col] / r, sub / r
            h[col] = r
            R[: col + 1, col] = h[: col + 1]
            g[j] = -sn[col] * g[col]
            g[col] = cs[col] * g[col]
            niter = j
            rel = abs(g[j]) / bnorm
            history.append(rel)
            if abs(sub) <= 1e-14 * max(1.0, abs(r)):
                breakdown = True
            if rel <= tol:
                converged = True
            if converged or breakdown or j == max_iter:
                break
        # next basis vector v_j = P_0 ... P_j e_j
        v = np.zeros(N)
        v[j] = 1.0
        for i in range(j, -1, -1):
            if W[i] is not None:
                v = _reflect(W[i], v)
        V.append(v)
        u = np.asarray(op.apply(v), dtype=float)
        for i in range(j + 1):
            if W[i] is not None:
                u = _reflect(W[i], u)
        z = u
        j += 1

    m = niter
    x = np.zeros(N)
    if m > 0:
        y = np.linalg.solve(R[:m, :m], g[:m])
        x = np.column_stack(V[:m]) @ y
    if breakdown and not converged:
        # invariant subspace reached: the solve above is exact up to roundoff
        res = np.linalg.norm(op.apply(x) - rhs) / bnorm
        history[-1] = res
        converged = res <= 10.0 * tol
    return GmresReport(x, history, m, converged, breakdown)


def arnoldi(apply, v0, m):
    """Householder Arnoldi factorization A V_m = V_{m+1} H.

    Returns (V, H) with V of shape (N, j) and H of shape (j+1, j) where
    j <= m is the reached dimension (early exit on breakdown).
    """
    v0 = np.asarray(v0, dtype=float)
    N = v0.shape[0]
    m = min(m, N)
    W: List[np.ndarray] = []
    V: List[np.ndarray] = []
    Hcols = []
    z = v0.copy()
    for j in range(m + 1):
        w, _ = _house_vec(z, j)
        if w is not None:
            z = _reflect(w, z)
        W.append(w)
        if j > 0:
            col = np.zeros(j + 1)
            col[: min(j + 1, N)] = z[: min(j + 1, N)]
            Hcols.append(col)
            if abs(col[j]) <= 1e-14 * max(1.0, np.linalg.norm(col)):
                break
        if j < m:
            v = np.zeros(N)
            v[j] = 1.0
            for i in range(j, -1, -1):
                if W[i] is not None:
                    v = _reflect(W[i], v)
            V.append(v)
            u = np.asarray(apply(v), dtype=float)
            for i in range(j + 1):
                if W[i] is not None:
                    u = _reflect(W[i], u)
            z = u
    k = len(Hcols)
    H = np.zeros((k + 1, k))
    for c, col in enumerate(Hcols):
        H[: c + 2, c] = col
    return np.column_stack(V[:k]) if k else np.zeros((N, 0)), H


def verify_iteration_bound(op: LinearOperator, rhs, k, tol=1e-10) -> IterationBoundReport:
    """Check the a-priori Krylov-dimension bound 3k-1 for a k-interval
    bordered shooting operator, in floating point.

    A violated bound is a reported outcome, not an error: the bound is an
    exact-arithmetic statement under a simple-eigenvalue assumption.
    """
    limit = 3 * k - 1
    report = gmres(op, rhs, tol, min(limit, op.dim))
    return IterationBoundReport(
        k=k,
        limit=limit,
        iterations=report.iterations,
        relative_residual=report.residual_history[-1],
        bound_held=bool(report.converged),
        history=report.residual_history,
    )
