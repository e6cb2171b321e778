"""Nodal lengths of Gaussian monochromatic random waves.

Samplers for Berry's random wave and arithmetic random waves, nodal-length
extraction, Kac-Rice two-point machinery and operator square-root couplings.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, DomainError, InsufficientDataError, NearSingularError, NodalWavesError,
                     NotPSDError, RegimeError)

__all__ = [
    "ConfigError", "DomainError", "InsufficientDataError", "NearSingularError", "NodalWavesError",
    "NotPSDError", "RegimeError", "__version__",
]
