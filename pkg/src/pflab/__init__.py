"""Fredholm determinants and Pfaffians of structured block integral operators.

Modules: quadrature (Gauss-Legendre grids), profiles (phi and its
spectral data), kernels (Hankel, Wiener-Hopf, Bessel evaluators), linop
(Nystrom operators and determinants), pfaffian, identities (residual
checks), asymptotics (large-t predictions and sweeps) and cli.
"""
from .errors import (PflabError, ContractViolation, DomainViolation, HypothesisViolation,
                     SingularOperatorError, SeriesTruncationError, PfaffianBranchError,
                     ConfigError)
from .profiles import Profile, sech, shifted_sech, gaussian_even, indicator_smoothed, bessel
from .identities import IdentityId, GridSpec, ResidualReport, check, sigma_sign
from .asymptotics import build_prediction, sweep

__version__ = "0.1.0"

__all__ = [
    "PflabError", "ContractViolation", "DomainViolation", "HypothesisViolation",
    "SingularOperatorError", "SeriesTruncationError", "PfaffianBranchError", "ConfigError",
    "Profile", "sech", "shifted_sech", "gaussian_even", "indicator_smoothed", "bessel",
    "IdentityId", "GridSpec", "ResidualReport", "check", "sigma_sign",
    "build_prediction", "sweep",
]
