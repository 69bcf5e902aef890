"""Projected gradient-ascent steering for a unicycle.

The longitudinal speed follows the projection of the gradient on the
heading, and the yaw rate follows the projection of its perpendicular::

    u     =  k1 <v, grad J>
    omega = -k2 <v, perp(grad J)>,    perp(g) = (g.y, -g.x)

With this sign convention the heading settles anti-parallel to the gradient
and the robot usually closes in on the source driving backwards (``u < 0``).
Nothing here restricts the sign of ``u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from ._types import ControlInput, PlanarVector, ValidationError
from .field import perp

__all__ = ["GaGains", "GradientSample", "GaController", "compute_control", "reconstruct_gradient"]

Frame = Literal["world", "body"]

# Relative slack for the orthogonality / equal-norm checks on a sample.
_SAMPLE_RTOL = 1e-9


@dataclass(frozen=True)
class GaGains:
    k1: float
    k2: float

    def __post_init__(self):
        if not (self.k1 > 0 and self.k2 > 0) or not (math.isfinite(self.k1) and math.isfinite(self.k2)):
            raise ValidationError(f"gains must be finite and positive, got k1={self.k1}, k2={self.k2}")


@dataclass(frozen=True)
class GradientSample:
    """A gradient, its perpendicular, and the frame both are expressed in."""

    grad: PlanarVector
    perp_grad: PlanarVector
    frame: Frame = "world"

    def __post_init__(self):
        if self.frame not in ("world", "body"):
            raise ValidationError(f"frame must be 'world' or 'body', got {self.frame!r}")
        scale = max(self.grad.dot(self.grad), self.perp_grad.dot(self.perp_grad), 1e-300)
        if abs(self.grad.dot(self.perp_grad)) > _SAMPLE_RTOL * scale:
            raise ValidationError("perp_grad is not orthogonal to grad")
        if abs(self.grad.norm() - self.perp_grad.norm()) > _SAMPLE_RTOL * math.sqrt(scale):
            raise ValidationError("perp_grad and grad differ in norm")

    @classmethod
    def from_gradient(cls, g: PlanarVector, frame: Frame = "world") -> GradientSample:
        return cls(g, perp(g), frame)


def compute_control(sample: GradientSample, theta: float, gains: GaGains) -> ControlInput:
    if sample.frame == "body":
        c, s = 1.0, 0.0
    else:
        if not math.isfinite(theta):
            raise ValidationError(f"theta must be finite, got {theta}")
        c, s = math.cos(theta), math.sin(theta)
    g, gp = sample.grad, sample.perp_grad
    u = gains.k1 * (c * g.x + s * g.y)
    omega = -gains.k2 * (c * gp.x + s * gp.y)
    return ControlInput(u, omega)


def reconstruct_gradient(control: ControlInput, theta: float, gains: GaGains) -> PlanarVector:
    """Invert :func:`compute_control` for a world-frame sample.

    ``u/k1`` and ``-omega/k2`` are the gradient's coordinates along ``v`` and
    along ``v`` rotated by +90 degrees.
    """
    a = control.u / gains.k1
    b = -control.omega / gains.k2
    c, s = math.cos(theta), math.sin(theta)
    return PlanarVector(a * c - b * s, a * s + b * c)


@dataclass(frozen=True)
class GaController:
    """Controller handle for :func:`sourceseek.vehicle.simulate`."""

    gains: GaGains

    kernel_code = 0

    def kernel_params(self) -> tuple[float, ...]:
        return (self.gains.k1, self.gains.k2)
