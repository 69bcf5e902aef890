"""Small value types shared across modules."""

from __future__ import annotations

import math
from dataclasses import dataclass


class SourceSeekError(Exception):
    """Base class for package errors."""


class ValidationError(SourceSeekError, ValueError):
    """Invalid argument or violated precondition."""


class DomainError(SourceSeekError):
    """A field was queried outside the region where it is defined.

    ``distance`` carries the offending distance to the source when known.
    """

    def __init__(self, message: str, distance: float | None = None):
        super().__init__(message)
        self.distance = distance


def _check_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValidationError(f"{name} must be finite, got {values!r}")


@dataclass(frozen=True, slots=True)
class PlanarVector:
    x: float
    y: float

    def __post_init__(self):
        _check_finite("PlanarVector", self.x, self.y)

    def dot(self, other: PlanarVector) -> float:
        return self.x * other.x + self.y * other.y

    def cross(self, other: PlanarVector) -> float:
        """z-component of ``self x other``."""
        return self.x * other.y - self.y * other.x

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def __add__(self, other: PlanarVector) -> PlanarVector:
        return PlanarVector(self.x + other.x, self.y + other.y)

    def __sub__(self, other: PlanarVector) -> PlanarVector:
        return PlanarVector(self.x - other.x, self.y - other.y)

    def scale(self, k: float) -> PlanarVector:
        return PlanarVector(k * self.x, k * self.y)

    def rotate(self, angle: float) -> PlanarVector:
        c, s = math.cos(angle), math.sin(angle)
        return PlanarVector(c * self.x - s * self.y, s * self.x + c * self.y)


ORIGIN = PlanarVector(0.0, 0.0)


@dataclass(frozen=True, slots=True)
class Pose:
    """Planar position and unwrapped heading (radians)."""

    z1: float
    z2: float
    theta: float

    def __post_init__(self):
        _check_finite("Pose", self.z1, self.z2, self.theta)

    @property
    def position(self) -> PlanarVector:
        return PlanarVector(self.z1, self.z2)

    @property
    def heading(self) -> PlanarVector:
        return PlanarVector(math.cos(self.theta), math.sin(self.theta))

    @classmethod
    def from_degrees(cls, z1: float, z2: float, theta_deg: float) -> Pose:
        return cls(float(z1), float(z2), math.radians(theta_deg))


@dataclass(frozen=True, slots=True)
class ControlInput:
    """Longitudinal speed ``u`` (m/s, may be negative) and yaw rate ``omega``."""

    u: float
    omega: float

    def __post_init__(self):
        _check_finite("ControlInput", self.u, self.omega)


STOP = ControlInput(0.0, 0.0)
