"""Exception types shared across the package."""

from __future__ import annotations


class RoughCalcError(Exception):
    """Base class for package-specific failures."""


class ConfigError(RoughCalcError):
    """Bad configuration text, unknown key, or unusable parameter combination."""


class IllConditionedModelError(RoughCalcError):
    """Gram matrix could not be factorized even at the top of the jitter ladder."""

    def __init__(self, message: str, jitter: float | None = None):
        super().__init__(message)
        self.jitter = jitter


class UnsupportedDimensionError(RoughCalcError):
    """Quadrature requested over more future coordinates than supported."""


class MissingGradientError(RoughCalcError):
    """Divergence of a state-dependent field requires gradient rules."""
