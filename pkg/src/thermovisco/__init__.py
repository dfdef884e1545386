"""Galerkin thermo-visco-elasticity with Orlicz-growth flow laws and an
L1-data heat-equation study."""

from .errors import (ConfigError, DomainError, InputError, NumericError, ThermoviscoError,
                     UnsupportedError)

__version__ = "0.1.0"

__all__ = ["ConfigError", "DomainError", "InputError", "NumericError", "ThermoviscoError",
           "UnsupportedError", "__version__"]
