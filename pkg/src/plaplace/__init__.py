"""Radial p-Laplace laboratory: solver, stability, sharp estimates and explicit singular families."""

from .core import (ClosedForm, Exponential, ExponentSet, ExtremalKind, Nonlinearity, PowerShift, ProblemSpec,
                   Regime, Sampled, critical_dimension, exact_extremal, exponent_set, regime)
from .errors import (DegenerateError, DomainError, IntegrationBlowUp, NoMatch, PLaplaceError, ProfileFormatError,
                     RegimeError)
from .profile import RadialGrid, RadialProfile

__all__ = [
    "ClosedForm", "Exponential", "ExponentSet", "ExtremalKind", "Nonlinearity", "PowerShift", "ProblemSpec",
    "Regime", "Sampled", "critical_dimension", "exact_extremal", "exponent_set", "regime",
    "DegenerateError", "DomainError", "IntegrationBlowUp", "NoMatch", "PLaplaceError", "ProfileFormatError",
    "RegimeError", "RadialGrid", "RadialProfile",
]
