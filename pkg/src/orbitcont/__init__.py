"""Finite patches of two-dimensional unstable manifolds of periodic
orbits and equilibria, computed by multiple-shooting continuation with
matrix-free Newton-Krylov correctors."""

__version__ = "0.1.0"

from .backend import BACKEND, USE_NUMBA
from .bvp import BoundaryCondition, LeftBoundary, ShootingProblem, Unknowns
from .continuation import (
    ContinuationConfig,
    ContinuationPoint,
    ContinuationRun,
    ManifoldMesh,
    MeshOrbit,
    run,
)
from .errors import (
    ConfigError,
    ContinuationError,
    FloquetError,
    IntegrationError,
    NewtonError,
    NoEventError,
    NonFiniteStateError,
    OrbitContError,
    PluginFormatError,
    StepUnderflowError,
)
from .fields import KernelPack, VectorField
from .integrate import (
    ArclengthStop,
    EventStop,
    IntegratorConfig,
    TimeStop,
    Trajectory,
    extended_trajectory,
    integrate,
    integrate_extended,
    integrate_until,
)
from .krylov import GmresReport, LinearOperator, arnoldi, gmres, verify_iteration_bound
from .models import (
    linear_diag,
    linear_saddle,
    linear_saddle_orbit,
    lorenz,
    quadratic_field,
    shear_model_plugin,
)
from .stability import (
    PeriodicOrbit,
    leading_floquet,
    monodromy_action,
    refine_periodic_orbit,
    segment_amplification,
)
