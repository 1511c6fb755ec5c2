"""Numerical geometry engine for products of complex space forms with a line.

Builds the model spaces CP^n x R, CH^n x R and C^n x R with their standard
almost-contact structure, evaluates surface invariants (fundamental forms,
mean curvature, quadratic forms and their dbar residuals), integrates framed
curves and rotational profiles, and runs reproducible verification suites.
"""

__version__ = "0.1.0"

from .spaces import SpaceFormSpec, ProductPoint, TangentVec, CosymplecticFrame
from .errors import (
    DomainError,
    NonAnalyticError,
    DegenerateImmersionError,
    NotIsothermalError,
    GridError,
    ConfigError,
)

__all__ = [
    "SpaceFormSpec",
    "ProductPoint",
    "TangentVec",
    "CosymplecticFrame",
    "DomainError",
    "NonAnalyticError",
    "DegenerateImmersionError",
    "NotIsothermalError",
    "GridError",
    "ConfigError",
    "__version__",
]
