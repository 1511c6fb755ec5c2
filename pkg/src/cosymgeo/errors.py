"""Exception types shared across the package."""


class DomainError(ValueError):
    """Point lies outside the valid chart domain."""


class NonAnalyticError(ArithmeticError):
    """Jet arithmetic hit a non-analytic point (division by a zero value)."""


class DegenerateImmersionError(ValueError):
    """Immersion fails the rank-2 condition at a sampled point."""


class NotIsothermalError(ValueError):
    """Operation requires isothermal parameters; use a built-in isothermal family."""


class GridError(ValueError):
    """Grid too coarse or otherwise unusable for the requested stencil."""


class ConfigError(ValueError):
    """Scenario configuration is invalid; message names the offending key."""
