"""Exception types shared across the package."""


class GeoXrayError(Exception):
    """Base class."""


class DomainError(GeoXrayError, ValueError):
    """A point lies outside the closed chart disk."""


class TrappingError(GeoXrayError):
    """A geodesic failed to exit within the allowed time."""


class IntegrationError(GeoXrayError):
    """The ODE integrator could not make progress."""


class ConjugatePointError(GeoXrayError):
    """b2 vanished away from t = 0, so the metric is not simple."""


class DivergenceError(GeoXrayError):
    """A Neumann series stopped contracting."""


class InconsistentConnectionError(GeoXrayError):
    """Curvature evaluated at different fiber angles disagreed."""


class ConfigError(GeoXrayError, ValueError):
    """Invalid experiment configuration."""
