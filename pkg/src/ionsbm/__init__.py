"""Spin-boson dynamics with engineered environments of Lindblad-damped modes.

Modules
-------
spectral      Lorentzian spectral densities, regression-theorem densities, fitting
correlation   bath correlation functions (exact Ohmic, regression, Fourier route)
lindblad      spin + truncated modes: Hamiltonian, Liouvillian, time evolution
nonmarkov     dynamical maps, divisibility and trace-distance measures
iontrap       two-ion crystals, Lamb-Dicke factors, Raman couplings, regime checks
chainmap      chain coefficients from a spectral density, exact small-chain solver
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    CapExceededError,
    ChainMapError,
    ConfigError,
    FitError,
    IllConditionedMapError,
    IonSBMError,
    ParameterError,
    PropagationError,
    QuadratureError,
    RegimeError,
)
