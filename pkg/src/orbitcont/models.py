"""Bundled vector fields with analytic Jacobian actions.

Two families are provided: quadratic-tensor fields

    dx_i/dt = b_i + L_ij x_j + Q_ijk x_j x_k

(covering Lorenz, arbitrary linear systems and Galerkin-truncation models
loaded from plugin files) and a saddle limit-cycle model whose 2D unstable
manifold is a coordinate plane, used as exact ground truth.
"""

import numpy as np

from .backend import jit_kernel
from .errors import PluginFormatError
from .fields import KernelPack, VectorField

_EMPTY = np.zeros(0)
_EMPTY2 = np.zeros((0, 0))
_EMPTY3 = np.zeros((0, 0, 0))


# ---------------------------------------------------------------------------
# kernel cores (restricted signature, compiled once per backend)

def _quad_f_core(x, b, L, Q, scal, out):
    n = x.shape[0]
    for i in range(n):
        acc = b[i]
        for j in range(n):
            acc += L[i, j] * x[j]
        for j in range(n):
            for k in range(n):
                q = Q[i, j, k]
                if q != 0.0:
                    acc += q * x[j] * x[k]
        out[i] = acc


def _quad_jvp_core(x, v, b, L, Q, scal, out):
    n = x.shape[0]
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += L[i, j] * v[j]
        for j in range(n):
            for k in range(n):
                q = Q[i, j, k]
                if q != 0.0:
                    acc += q * (v[j] * x[k] + x[j] * v[k])
        out[i] = acc


def _saddle_f_core(x, b, L, Q, scal, out):
    a = scal[0]
    br = scal[1]
    r = np.sqrt(x[0] * x[0] + x[1] * x[1])
    if r > 0.0:
        al = a * (1.0 - 1.0 / r)
        out[0] = al * x[0] - x[1]
        out[1] = x[0] + al * x[1]
    else:
        out[0] = 0.0
        out[1] = 0.0
    for i in range(2, x.shape[0]):
        out[i] = -br * x[i]


def _saddle_jvp_core(x, v, b, L, Q, scal, out):
    a = scal[0]
    br = scal[1]
    r2 = x[0] * x[0] + x[1] * x[1]
    r = np.sqrt(r2)
    if r > 0.0:
        al = a * (1.0 - 1.0 / r)
        gv = a * (x[0] * v[0] + x[1] * v[1]) / (r2 * r)
        out[0] = al * v[0] + x[0] * gv - v[1]
        out[1] = v[0] + al * v[1] + x[1] * gv
    else:
        out[0] = 0.0
        out[1] = 0.0
    for i in range(2, x.shape[0]):
        out[i] = -br * v[i]


_QUAD_F = jit_kernel(_quad_f_core)
_QUAD_JVP = jit_kernel(_quad_jvp_core)
_SADDLE_F = jit_kernel(_saddle_f_core)
_SADDLE_JVP = jit_kernel(_saddle_jvp_core)


# ---------------------------------------------------------------------------

def quadratic_field(b, L, Q, name="quadratic", params=None):
    """Vector field b + L x + Q:(x,x) with analytic Jacobian action."""
    b = np.ascontiguousarray(b, dtype=float)
    L = np.ascontiguousarray(L, dtype=float)
    Q = np.ascontiguousarray(Q, dtype=float)
    n = b.shape[0]
    if L.shape != (n, n) or Q.shape != (n, n, n):
        raise ValueError("inconsistent tensor shapes")

    def ev(x):
        out = np.empty(n)
        _quad_f_core(x, b, L, Q, _EMPTY, out)
        return out

    def ja(x, v):
        out = np.empty(n)
        _quad_jvp_core(x, v, b, L, Q, _EMPTY, out)
        return out

    return VectorField(
        dim=n, eval=ev, jacobian_action=ja,
        kernels=KernelPack(_QUAD_F, _QUAD_JVP, b, L, Q, _EMPTY),
        name=name, params=dict(params or {}),
    )


def lorenz(sigma=10.0, rho=28.0, beta=8.0 / 3.0):
    """The Lorenz system as a quadratic-tensor field."""
    L = np.array([
        [-sigma, sigma, 0.0],
        [rho, -1.0, 0.0],
        [0.0, 0.0, -beta],
    ])
    Q = np.zeros((3, 3, 3))
    Q[1, 0, 2] = -1.0  # -x z in the y equation
    Q[2, 0, 1] = 1.0  # x y in the z equation
    return quadratic_field(
        np.zeros(3), L, Q, name="lorenz",
        params={"sigma": sigma, "rho": rho, "beta": beta},
    )


def linear_diag(rates):
    """Diagonal linear system x_i' = rates_i x_i (test helper)."""
    rates = np.asarray(rates, dtype=float)
    n = rates.shape[0]
    return quadratic_field(np.zeros(n), np.diag(rates), np.zeros((n, n, n)),
                           name="linear_diag", params={"rates": rates.tolist()})


def linear_saddle(a, b, dim=3):
    """Saddle limit-cycle model with an exactly planar 2D unstable manifold.

    The (x0, x1) plane carries the polar dynamics r' = a (r - 1),
    theta' = 1, so the unit circle is a periodic orbit of period 2 pi with
    leading multiplier exp(2 pi a) and radial leading eigenvector.  All
    remaining coordinates contract at rate -b, hence the unstable manifold
    of the cycle is exactly the (x0, x1) coordinate plane.
    """
    if a <= 0 or b <= 0:
        raise ValueError("rates a and b must be positive")
    if dim < 3:
        raise ValueError("dim must be at least 3")
    scal = np.array([float(a), float(b)])

    def ev(x):
        out = np.empty(dim)
        _saddle_f_core(x, _EMPTY, _EMPTY2, _EMPTY3, scal, out)
        return out

    def ja(x, v):
        out = np.empty(dim)
        _saddle_jvp_core(x, v, _EMPTY, _EMPTY2, _EMPTY3, scal, out)
        return out

    return VectorField(
        dim=dim, eval=ev, jacobian_action=ja,
        kernels=KernelPack(_SADDLE_F, _SADDLE_JVP, _EMPTY, _EMPTY2, _EMPTY3, scal),
        name="linear_saddle", params={"a": float(a), "b": float(b), "dim": dim},
    )


def linear_saddle_orbit(field):
    """Exact periodic-orbit data for :func:`linear_saddle`."""
    from .stability import PeriodicOrbit

    a = field.params["a"]
    n = field.dim
    xbar = np.zeros(n)
    xbar[0] = 1.0
    u1 = np.zeros(n)
    u1[0] = 1.0
    period = 2.0 * np.pi
    return PeriodicOrbit(base_point=xbar, period=period,
                         mu1=float(np.exp(a * period)), u1=u1, residual=0.0)


# ---------------------------------------------------------------------------
# plugin file format: sections [dim], [constant], [linear], [quadratic];
# entries are 0-based integer indices followed by one real coefficient.

_SECTIONS = ("dim", "constant", "linear", "quadratic")
_ARITY = {"constant": 1, "linear": 2, "quadratic": 3}


def shear_model_plugin(path):
    """Load a quadratic-nonlinearity model from a structured text file."""
    dim = None
    entries = {"constant": [], "linear": [], "quadratic": []}
    section = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip().lower()
                if section not in _SECTIONS:
                    raise PluginFormatError(f"{path}:{lineno}: unknown section [{section}]")
                continue
            if section is None:
                raise PluginFormatError(f"{path}:{lineno}: data before any section header")
            toks = line.split()
            if section == "dim":
                if dim is not None:
                    raise PluginFormatError(f"{path}:{lineno}: duplicate [dim]")
                try:
                    dim = int(toks[0])
                except ValueError:
                    raise PluginFormatError(f"{path}:{lineno}: bad dimension {toks[0]!r}")
                if len(toks) != 1 or dim < 1:
                    raise PluginFormatError(f"{path}:{lineno}: [dim] wants one positive integer")
                continue
            arity = _ARITY[section]
            if len(toks) != arity + 1:
                raise PluginFormatError(
                    f"{path}:{lineno}: [{section}] entries want {arity} indices and a value"
                )
            try:
                idx = [int(t) for t in toks[:arity]]
                val = float(toks[arity])
            except ValueError:
                raise PluginFormatError(f"{path}:{lineno}: cannot parse {line!r}")
            entries[section].append((lineno, idx, val))

    if dim is None:
        raise PluginFormatError(f"{path}: missing [dim] section")

    b = np.zeros(dim)
    L = np.zeros((dim, dim))
    Q = np.zeros((dim, dim, dim))
    arrays = {"constant": b, "linear": L, "quadratic": Q}
    for section, arr in arrays.items():
        for lineno, idx, val in entries[section]:
            if any(i < 0 or i >= dim for i in idx):
                raise PluginFormatError(
                    f"{path}:{lineno}: index out of range for dim={dim}: {idx}"
                )
            arr[tuple(idx)] += val

    import os

    return quadratic_field(b, L, Q, name=os.path.basename(path),
                           params={"path": str(path), "dim": dim})
