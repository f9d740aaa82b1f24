"""Multiscale detrended cross-correlation (rho_q) for uniform-interval return series."""

__version__ = "0.1.0"

from rhoq.errors import (  # noqa: F401
    ConfigError,
    DataError,
    DegenerateVariance,
    NumericalError,
    RhoqError,
)
