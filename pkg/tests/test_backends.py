"""The numba and pure-numpy kernel builds must agree.

Backend choice is fixed at import time by MANIFOLD_BACKEND, so the numpy
path is exercised two ways: in-process through run_propagate(use_jit=False)
and out-of-process through a subprocess with the env flag set.
"""

import json
import os
import subprocess
import sys

import numpy as np

from orbitcont import IntegratorConfig, integrate, lorenz
from orbitcont.integrate import _generic_pack
from orbitcont import kernels

_SRC = r"""
import json
import numpy as np
from orbitcont import IntegratorConfig, backend, integrate, lorenz

field = lorenz()
cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12)
x0 = np.array([-13.7638, -19.5789, 27.0])
traj = integrate(field, x0, 1.5587, cfg, with_arclength=True)
print(json.dumps({"backend": backend.BACKEND,
                  "end": traj.final_state.tolist(),
                  "arc": traj.arclength()}))
"""


def _run_subprocess(backend_value):
    env = dict(os.environ)
    if backend_value is None:
        env.pop("MANIFOLD_BACKEND", None)
    else:
        env["MANIFOLD_BACKEND"] = backend_value
    return subprocess.run([sys.executable, "-c", _SRC], env=env,
                          capture_output=True, text=True)


def test_numpy_core_matches_jit_in_process():
    field = lorenz()
    f, jvp, b, L, Q, scal = _generic_pack(field)
    kp = field.kernels
    y0 = np.array([-13.7638, -19.5789, 27.0])
    args = (y0, 1.2, 1e-10, 1e-12, np.inf, 3, False, False, 200000)
    st1, ts1, ys1, _ = kernels.run_propagate(
        False, f, jvp, b, L, Q, scal, *args)
    st2, ts2, ys2, _ = kernels.run_propagate(
        True, kp.f, kp.jvp, kp.b, kp.L, kp.Q, kp.scal, *args)
    assert st1 == st2 == kernels.OK
    # same algorithm, same step-size sequence up to float noise
    assert abs(len(ts1) - len(ts2)) <= 2
    assert np.linalg.norm(ys1[-1] - ys2[-1]) < 1e-7


def test_numpy_core_variational_matches_jit():
    field = lorenz()
    f, jvp, b, L, Q, scal = _generic_pack(field)
    kp = field.kernels
    y0 = np.concatenate([[-13.7638, -19.5789, 27.0], [1.0, 0.0, 0.0]])
    args = (y0, 0.8, 1e-10, 1e-12, np.inf, 3, True, False, 200000)
    st1, _, ys1, _ = kernels.run_propagate(False, f, jvp, b, L, Q, scal, *args)
    st2, _, ys2, _ = kernels.run_propagate(
        True, kp.f, kp.jvp, kp.b, kp.L, kp.Q, kp.scal, *args)
    assert st1 == st2 == kernels.OK
    assert np.linalg.norm(ys1[-1] - ys2[-1]) < 1e-6 * np.linalg.norm(ys2[-1])


def test_env_flag_selects_numpy_backend():
    r = _run_subprocess("numpy")
    assert r.returncode == 0, r.stderr
    doc = json.loads(r.stdout)
    assert doc["backend"] == "numpy"
    # compare against the in-process (numba) result
    traj = integrate(lorenz(), np.array([-13.7638, -19.5789, 27.0]), 1.5587,
                     IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12),
                     with_arclength=True)
    assert np.linalg.norm(np.array(doc["end"]) - traj.final_state) < 1e-7
    assert abs(doc["arc"] - traj.arclength()) < 1e-6


def test_invalid_backend_value_rejected():
    r = _run_subprocess("cuda")
    assert r.returncode != 0
    assert "MANIFOLD_BACKEND" in r.stderr
