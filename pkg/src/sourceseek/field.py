"""Analytic potential fields with exact gradients.

Every field exposes ``value(p)`` and ``gradient(p)``; the module-level
``evaluate``/``gradient`` helpers simply dispatch.  The maximizer of each
field is the "source" a controller is trying to reach.

Kernel packing (``kernel_code`` / ``kernel_params``) is how the compiled
closed-loop core receives a field; keep both backends in sync when adding a
variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from ._types import ORIGIN, DomainError, PlanarVector, ValidationError

__all__ = [
    "Quadratic",
    "NonQuadA",
    "NonQuadB",
    "FanPolynomial",
    "FieldSpec",
    "FAN_COEFFS",
    "evaluate",
    "gradient",
    "perp",
    "finite_diff_gradient",
    "field_from_name",
    "FIELD_NAMES",
]

# Wind speed (m/s) as a quartic in R = r_f / d, highest power first.
FAN_COEFFS = (68.54, -102.80, 36.13, 6.41, -0.34)


@dataclass(frozen=True)
class Quadratic:
    """``J = J* - c1 (z1 - z1*)^2 - c2 (z2 - z2*)^2``."""

    j_star: float = 0.0
    c1: float = 1.0
    c2: float = 1.0
    center: PlanarVector = ORIGIN

    kernel_code = 0

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValidationError(f"quadratic curvatures must be positive, got c1={self.c1}, c2={self.c2}")
        if not math.isfinite(self.j_star):
            raise ValidationError("j_star must be finite")

    @property
    def source(self) -> PlanarVector:
        return self.center

    def value(self, p: PlanarVector) -> float:
        dx = p.x - self.center.x
        dy = p.y - self.center.y
        return self.j_star - self.c1 * dx * dx - self.c2 * dy * dy

    def gradient(self, p: PlanarVector) -> PlanarVector:
        return PlanarVector(-2.0 * self.c1 * (p.x - self.center.x), -2.0 * self.c2 * (p.y - self.center.y))

    def kernel_params(self) -> tuple[float, ...]:
        return (self.j_star, self.c1, self.c2, self.center.x, self.center.y)


@dataclass(frozen=True)
class NonQuadA:
    """``J = -z1^2 - (z2^2 - z1^3)^2``; maximum 0 at the origin."""

    kernel_code = 1
    source = ORIGIN

    def value(self, p: PlanarVector) -> float:
        q = p.y * p.y - p.x * p.x * p.x
        return -p.x * p.x - q * q

    def gradient(self, p: PlanarVector) -> PlanarVector:
        q = p.y * p.y - p.x * p.x * p.x
        return PlanarVector(-2.0 * p.x + 6.0 * p.x * p.x * q, -4.0 * p.y * q)

    def kernel_params(self) -> tuple[float, ...]:
        return ()


@dataclass(frozen=True)
class NonQuadB:
    """``J = -z1^2 - (z2 - z1^2)^2``; maximum 0 at the origin."""

    kernel_code = 2
    source = ORIGIN

    def value(self, p: PlanarVector) -> float:
        q = p.y - p.x * p.x
        return -p.x * p.x - q * q

    def gradient(self, p: PlanarVector) -> PlanarVector:
        q = p.y - p.x * p.x
        return PlanarVector(-2.0 * p.x + 4.0 * p.x * q, -2.0 * q)

    def kernel_params(self) -> tuple[float, ...]:
        return ()


@dataclass(frozen=True)
class FanPolynomial:
    """Fitted fan wind speed ``v(R)``, ``R = r_f / d``, used directly as ``J``.

    Only the annulus ``d >= d_min`` is valid; closer than that the fit is
    meaningless and every query raises :class:`DomainError`.

    Note that the fitted quartic is not monotone in ``d``: it has a local
    maximum ring near ``d = 0.918 m`` and a local minimum near ``d = 0.641 m``
    (for the default coefficients), so ``+grad J`` points away from the fan
    inside that ring.
    """

    coeffs: tuple[float, float, float, float, float] = FAN_COEFFS
    r_f: float = 0.45
    center: PlanarVector = ORIGIN
    d_min: float = 0.5

    kernel_code = 3

    def __post_init__(self):
        if len(self.coeffs) != 5:
            raise ValidationError("fan polynomial needs exactly 5 coefficients")
        if not (self.r_f > 0 and self.d_min > 0):
            raise ValidationError(f"r_f and d_min must be positive, got r_f={self.r_f}, d_min={self.d_min}")

    @property
    def source(self) -> PlanarVector:
        return self.center

    def distance(self, p: PlanarVector) -> float:
        return math.hypot(p.x - self.center.x, p.y - self.center.y)

    def _check(self, d: float) -> None:
        if not d >= self.d_min:
            raise DomainError(f"point at distance {d:.6g} m is inside the fan exclusion radius {self.d_min} m", distance=d)

    def speed(self, R: float) -> float:
        c0, c1, c2, c3, c4 = self.coeffs
        return (((c0 * R + c1) * R + c2) * R + c3) * R + c4

    def speed_derivative(self, R: float) -> float:
        c0, c1, c2, c3, _ = self.coeffs
        return ((4.0 * c0 * R + 3.0 * c1) * R + 2.0 * c2) * R + c3

    def value(self, p: PlanarVector) -> float:
        d = self.distance(p)
        self._check(d)
        return self.speed(self.r_f / d)

    def gradient(self, p: PlanarVector) -> PlanarVector:
        d = self.distance(p)
        self._check(d)
        # dJ/dd = v'(R) * dR/dd with dR/dd = -r_f / d^2; direction (p - c)/d
        g = -self.speed_derivative(self.r_f / d) * self.r_f / (d * d * d)
        return PlanarVector(g * (p.x - self.center.x), g * (p.y - self.center.y))

    def kernel_params(self) -> tuple[float, ...]:
        return (*self.coeffs, self.r_f, self.center.x, self.center.y, self.d_min)


FieldSpec = Union[Quadratic, NonQuadA, NonQuadB, FanPolynomial]

FIELD_NAMES = ("quadratic", "nonquad_a", "nonquad_b", "fan")


def field_from_name(name: str, **params) -> FieldSpec:
    """Build a field from its config name (``quadratic``, ``nonquad_a``, ``nonquad_b``, ``fan``)."""
    if name == "quadratic":
        if "center" in params and not isinstance(params["center"], PlanarVector):
            params["center"] = PlanarVector(*params["center"])
        return Quadratic(**params)
    if name == "nonquad_a":
        return NonQuadA(**params)
    if name == "nonquad_b":
        return NonQuadB(**params)
    if name == "fan":
        if "center" in params and not isinstance(params["center"], PlanarVector):
            params["center"] = PlanarVector(*params["center"])
        if "coeffs" in params:
            params["coeffs"] = tuple(float(c) for c in params["coeffs"])
        return FanPolynomial(**params)
    raise ValidationError(f"unknown field {name!r}; expected one of {', '.join(FIELD_NAMES)}")


def evaluate(field: FieldSpec, p: PlanarVector) -> float:
    return field.value(p)


def gradient(field: FieldSpec, p: PlanarVector) -> PlanarVector:
    return field.gradient(p)


def perp(g: PlanarVector) -> PlanarVector:
    """Rotate by -90 degrees: ``(g.y, -g.x)``.

    ``perp(g) x g = |g|^2 >= 0``, ``<perp(g), g> = 0`` and the norms match.
    """
    return PlanarVector(g.y, -g.x)


def finite_diff_gradient(field: FieldSpec, p: PlanarVector, h: float = 1e-5) -> PlanarVector:
    """Central-difference gradient; an oracle independent of the analytic path."""
    if not h > 0:
        raise ValidationError(f"step must be positive, got {h}")
    fx = field.value(PlanarVector(p.x + h, p.y)) - field.value(PlanarVector(p.x - h, p.y))
    fy = field.value(PlanarVector(p.x, p.y + h)) - field.value(PlanarVector(p.x, p.y - h))
    return PlanarVector(fx / (2.0 * h), fy / (2.0 * h))
