"""Exception types raised across the package."""
from __future__ import annotations


class PulsefrontError(Exception):
    """Base class for all package errors."""


class InvalidMedium(PulsefrontError, ValueError):
    pass


class GridError(PulsefrontError, ValueError):
    pass


class NonConvergence(PulsefrontError):
    """Newton iteration failed; carries the last residual norm."""

    def __init__(self, message: str, residual: float = float("nan"), angle: float | None = None):
        super().__init__(message)
        self.residual = residual
        self.angle = angle


class NonMonotoneProfile(PulsefrontError):
    pass


class TargetUnreachable(PulsefrontError):
    pass


class WindowTooShort(PulsefrontError):
    pass


class AdjointDegenerate(PulsefrontError):
    pass


class InvalidInitialData(PulsefrontError, ValueError):
    pass


class NonFiniteField(PulsefrontError):
    pass


class NoCrossing(PulsefrontError):
    pass


class InsufficientWindow(PulsefrontError):
    pass


class ConstantsInfeasible(PulsefrontError):
    pass


class RegionTouchesClamp(PulsefrontError):
    pass


class OutsideDomain(PulsefrontError, ValueError):
    """Barrier evaluated outside the time strip where it is defined."""


class ConfigError(PulsefrontError):
    """Configuration errors; ``errors`` holds one located message per problem."""

    def __init__(self, errors: list[str]):
        super().__init__("\n".join(errors))
        self.errors = list(errors)


class NearStationaryWarning(UserWarning):
    """Mass integral close to zero: fronts may be standing or fail to exist."""
