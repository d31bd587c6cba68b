"""Vector fields: user-supplied right-hand sides with Jacobian actions."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass
class KernelPack:
    """Backend-compatible kernel form of a vector field.

    ``f`` and ``jvp`` are functions in the restricted kernel signature
    ``f(x, b, L, Q, scal, out)`` / ``jvp(x, v, b, L, Q, scal, out)``,
    compiled with numba on the default backend.  ``b``, ``L``, ``Q`` hold
    constant/linear/quadratic tensors (may be size-0 dummies) and ``scal``
    any extra scalar parameters.
    """

    f: Callable
    jvp: Callable
    b: np.ndarray
    L: np.ndarray
    Q: np.ndarray
    scal: np.ndarray


@dataclass
class VectorField:
    """Autonomous ODE right-hand side x' = f(x) on R^dim.

    ``jacobian_action(x, v)`` returns Df(x) v.  When absent, a central
    finite difference with step h = sqrt(eps) * (1 + |x|) is substituted.
    ``kernels`` optionally provides a numba-compatible form used by the
    fast propagation path.
    """

    dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    jacobian_action: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    kernels: Optional[KernelPack] = None
    name: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")

    def __call__(self, x):
        return self.eval(np.asarray(x, dtype=float))

    def jac_action(self, x, v):
        """Df(x) v, analytic when available, else central finite differences."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.jacobian_action is not None:
            return np.asarray(self.jacobian_action(x, v), dtype=float)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return np.zeros_like(v)
        h = np.sqrt(np.finfo(float).eps) * (1.0 + np.linalg.norm(x))
        vh = v / nv
        return nv * (self.eval(x + h * vh) - self.eval(x - h * vh)) / (2.0 * h)

    def reversed(self):
        """Time-reversed field -f, used for stable-manifold computations.

        The kernel pack is dropped, so reversed fields run on the generic
        propagation path.
        """
        ev = self.eval
        ja = self.jacobian_action
        return VectorField(
            dim=self.dim,
            eval=lambda x: -ev(x),
            jacobian_action=(None if ja is None else (lambda x, v: -ja(x, v))),
            name=self.name + "_reversed",
            params=dict(self.params),
        )
