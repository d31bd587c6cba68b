"""Exception hierarchy shared across the package."""


class OrbitContError(Exception):
    """Base class for all errors raised by this package."""


class IntegrationError(OrbitContError):
    """Time integration failed."""


class StepUnderflowError(IntegrationError):
    """The adaptive step size collapsed; the problem is likely too stiff
    for the explicit integrator."""


class NonFiniteStateError(IntegrationError):
    """The state blew up to inf/nan during integration."""


class NoEventError(OrbitContError):
    """No stopping event occurred before t_max."""


class NewtonError(OrbitContError):
    """Newton iteration failed to converge."""


class FloquetError(OrbitContError):
    """Leading Floquet pair could not be isolated.

    Carries the Ritz values computed so far in ``ritz_values``.
    """

    def __init__(self, message, ritz_values=None):
        super().__init__(message)
        self.ritz_values = ritz_values


class ContinuationError(OrbitContError):
    """Continuation driver could not advance (e.g. step size underflow)."""


class PluginFormatError(OrbitContError):
    """Malformed model plugin file."""


class ConfigError(OrbitContError):
    """Invalid run configuration."""
