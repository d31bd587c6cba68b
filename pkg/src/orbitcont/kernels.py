"""Hot numeric kernels: adaptive Dormand-Prince 5(4) propagation.

The propagator integrates the augmented state

    y = (x, [v], [s], [ds])

where ``x`` is the base state, ``v`` the optional variational (linearised)
state, ``s`` the optional accumulated arc length and ``ds`` the optional
directional derivative of the arc length with respect to the initial
condition, transported along ``v``.  One embedded error controller acts on
the concatenated state.

All kernels take the model right-hand side as a pair of functions
``f(x, b, L, Q, scal, out)`` and ``jvp(x, v, b, L, Q, scal, out)`` together
with their parameter arrays, so the same source compiles under numba (model
functions are themselves ``@jit_kernel`` dispatchers) and runs unchanged as
plain Python on the numpy backend.
"""

import numpy as np

from .backend import jit_kernel

# status codes returned by the propagator
OK = 0
STEP_UNDERFLOW = 1
NONFINITE = 2
TOO_MANY_STEPS = 3

# Dormand-Prince RK5(4) tableau
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = (
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
)
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = (
    35.0 / 384.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
)
# difference between 5th and 4th order weights
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)


def _aug_rhs_core(f, jvp, b, L, Q, scal, n, with_var, with_arc, y, out):
    f(y[:n], b, L, Q, scal, out[:n])
    idx = n
    if with_var:
        jvp(y[:n], y[n : 2 * n], b, L, Q, scal, out[n : 2 * n])
        idx = 2 * n
    if with_arc:
        s = 0.0
        for i in range(n):
            s += out[i] * out[i]
        nf = np.sqrt(s)
        out[idx] = nf
        if with_var:
            if nf > 0.0:
                d = 0.0
                for i in range(n):
                    d += out[i] * out[n + i]
                out[idx + 1] = d / nf
            else:
                out[idx + 1] = 0.0


def _propagate_core(
    aug, f, jvp, b, L, Q, scal, y0, t_final, rtol, atol, max_step, n, with_var, with_arc, max_nodes
):
    m = y0.shape[0]
    cap = 256
    ts = np.empty(cap)
    ys = np.empty((cap, m))
    fs = np.empty((cap, m))

    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    k5 = np.empty(m)
    k6 = np.empty(m)
    k7 = np.empty(m)
    ytmp = np.empty(m)
    ynew = np.empty(m)

    y = y0.copy()
    aug(f, jvp, b, L, Q, scal, n, with_var, with_arc, y, k1)
    ts[0] = 0.0
    ys[0] = y
    fs[0] = k1
    nn = 1

    if t_final == 0.0:
        return OK, ts[:1].copy(), ys[:1, :].copy(), fs[:1, :].copy()

    # initial step size from scaled magnitudes of y0 and f(y0)
    d0 = 0.0
    d1 = 0.0
    for i in range(m):
        sc = atol + rtol * abs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (k1[i] / sc) ** 2
    d0 = np.sqrt(d0 / m)
    d1 = np.sqrt(d1 / m)
    if d0 < 1e-5 or d1 < 1e-5:
        h = 1e-6
    else:
        h = 0.01 * d0 / d1
    if h > max_step:
        h = max_step
    if h > t_final:
        h = t_final

    t = 0.0
    status = OK
    nonfinite_seen = False
    while t < t_final:
        last = False
        if h >= t_final - t:
            h = t_final - t
            last = True
        if h < 4.0e-16 * max(abs(t), 1.0):
            status = NONFINITE if nonfinite_seen else STEP_UNDERFLOW
            break

        for i in range(m):
            ytmp[i] = y[i] + h * _A21 * k1[i]
        aug(f, jvp, b, L, Q, scal, n, with_var, with_arc, ytmp, k2)
        for i in range(m):
            ytmp[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
        aug(f, jvp, b, L, Q, scal, n, with_var, with_arc, ytmp, k3)
        for i in range(m):
            ytmp[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        aug(f, jvp, b, L, Q, scal, n, with_var, with_arc, ytmp, k4)
        for i in range(m):
            ytmp[i] = y[i] + h * (
                _A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i]
            )
        aug(f, jvp, b, L, Q, scal, n, with_var, with_arc, ytmp, k5)
        for i in range(m):
            ytmp[i] = y[i] + h * (
                _A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
            )
        aug(f, jvp, b, L, Q, scal, n, with_var, with_arc, ytmp, k6)
        for i in range(m):
            ynew[i] = y[i] + h * (
                _B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i]
            )
        aug(f, jvp, b, L, Q, scal, n, with_var, with_arc, ynew, k7)

        err = 0.0
        finite = True
        for i in range(m):
            e = h * (
                _E1 * k1[i]
                + _E3 * k3[i]
                + _E4 * k4[i]
                + _E5 * k5[i]
                + _E6 * k6[i]
                + _E7 * k7[i]
            )
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            err += (e / sc) ** 2
            if not np.isfinite(ynew[i]):
                finite = False
        err = np.sqrt(err / m)

        if not finite or not np.isfinite(err):
            nonfinite_seen = True
            h *= 0.1
            continue

        if err <= 1.0:
            nonfinite_seen = False
            t = t_final if last else t + h
            for i in range(m):
                y[i] = ynew[i]
                k1[i] = k7[i]
            if nn == cap:
                cap2 = cap * 2
                ts2 = np.empty(cap2)
                ys2 = np.empty((cap2, m))
                fs2 = np.empty((cap2, m))
                ts2[:cap] = ts
                ys2[:cap] = ys
                fs2[:cap] = fs
                ts, ys, fs, cap = ts2, ys2, fs2, cap2
            ts[nn] = t
            ys[nn] = y
            fs[nn] = k1
            nn += 1
            if nn > max_nodes:
                status = TOO_MANY_STEPS
                break
            if err == 0.0:
                fac = 10.0
            else:
                fac = 0.9 * err ** (-0.2)
                if fac > 10.0:
                    fac = 10.0
                elif fac < 0.2:
                    fac = 0.2
            h = h * fac
            if h > max_step:
                h = max_step
        else:
            fac = 0.9 * err ** (-0.2)
            if fac < 0.2:
                fac = 0.2
            elif fac > 1.0:
                fac = 1.0
            h = h * fac

    return status, ts[:nn].copy(), ys[:nn, :].copy(), fs[:nn, :].copy()


_AUG_PY = _aug_rhs_core
_AUG_JIT = jit_kernel(_aug_rhs_core, cache=False)
_PROP_PY = _propagate_core
_PROP_JIT = jit_kernel(_propagate_core, cache=False)


def run_propagate(use_jit, f, jvp, b, L, Q, scal, y0, t_final, rtol, atol,
                  max_step, n, with_var, with_arc, max_nodes):
    """Dispatch to the compiled or the plain-Python propagation core.

    ``use_jit`` may only be True when ``f``/``jvp`` are jit-compiled kernels
    (numba backend with a model that carries a KernelPack).
    """
    if use_jit:
        return _PROP_JIT(_AUG_JIT, f, jvp, b, L, Q, scal, y0, t_final, rtol,
                         atol, max_step, n, with_var, with_arc, max_nodes)
    return _PROP_PY(_AUG_PY, f, jvp, b, L, Q, scal, y0, t_final, rtol,
                    atol, max_step, n, with_var, with_arc, max_nodes)
