"""Exception types shared across the package."""


class TerraceLabError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(TerraceLabError, ValueError):
    """Invalid parameters, grids or config files. Message names the offending field(s)."""


class NoConvergenceError(TerraceLabError, RuntimeError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message, last_residual=None):
        super().__init__(message)
        self.last_residual = last_residual


class UnsupportedModelError(TerraceLabError, ValueError):
    """Operation requires a model class the given model does not belong to."""


class IntegrationFailureError(TerraceLabError, RuntimeError):
    """Time integration produced non-finite values."""

    def __init__(self, message, last_valid_time=None):
        super().__init__(message)
        self.last_valid_time = last_valid_time


class MissingCrossingError(TerraceLabError, RuntimeError):
    """A level was never attained at a watch point before the final time."""

    def __init__(self, message, attained_sup=None):
        super().__init__(message)
        self.attained_sup = attained_sup


class NoWaveFoundError(TerraceLabError, RuntimeError):
    """Newton continuation on the wave problem diverged (no connecting front found)."""


class OrientationError(TerraceLabError, RuntimeError):
    """Wave solver converged to a negative speed; end states are probably swapped."""


class NoFrontInBracketError(TerraceLabError, RuntimeError):
    """Shooting bisection could not bracket a connecting orbit."""


class RunawayTerraceError(TerraceLabError, RuntimeError):
    """Terrace construction exceeded the stratum cap (numerical pathology)."""
