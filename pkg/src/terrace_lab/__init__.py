"""terrace-lab: a numerical laboratory for front propagation in 1-D periodic
reaction-diffusion equations.

Simulates Heaviside-type initial data, detects the stack of fronts the
solution settles into (plateau states, pulsating fronts, speeds, drifts) and
cross-validates every detected object against independent solvers.
"""

from .errors import (
    ConfigurationError,
    IntegrationFailureError,
    MissingCrossingError,
    NoConvergenceError,
    NoFrontInBracketError,
    NoWaveFoundError,
    OrientationError,
    RunawayTerraceError,
    TerraceLabError,
    UnsupportedModelError,
)
from .profiles import Profile, constant_profile
from .reaction import ReactionModel, lipschitz_bound, make_preset, validate

__all__ = [
    "ConfigurationError",
    "IntegrationFailureError",
    "MissingCrossingError",
    "NoConvergenceError",
    "NoFrontInBracketError",
    "NoWaveFoundError",
    "OrientationError",
    "Profile",
    "ReactionModel",
    "RunawayTerraceError",
    "TerraceLabError",
    "UnsupportedModelError",
    "constant_profile",
    "lipschitz_bound",
    "make_preset",
    "validate",
]

__version__ = "0.1.0"
