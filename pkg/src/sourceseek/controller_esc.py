"""Extremum-seeking variant of the projected gradient-ascent law.

Only the scalar field value ``J`` is measured.  It passes a washout
(high-pass ``s/(s+h)``) filter, is demodulated against the dither phase, and
the dither itself is injected through the same estimate::

    Jz1 =  c_z1 * Delta * sin(w0 t) + a w0 cos(w0 t)
    Jz2 = -c_z2 * Delta * cos(w0 t) + a w0 sin(w0 t)

The perpendicular used here is the +90 degree rotation ``(-Jz2, Jz1)``,
opposite to the one in :mod:`sourceseek.controller_ga`.  The averaged
analysis in :mod:`sourceseek.averaging` is built on this choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ._types import ControlInput, PlanarVector, ValidationError

__all__ = [
    "EscParams",
    "WashoutState",
    "EscController",
    "MAX_PHASE_STEP",
    "washout_step",
    "estimate_gradient",
    "compute_control",
    "esc_controller",
]

# Largest allowed omega0 * dt (about 63 samples per dither period).
MAX_PHASE_STEP = 0.1


@dataclass(frozen=True)
class EscParams:
    a: float
    omega0: float
    h: float
    c_z1: float
    c_z2: float
    k1: float
    k2: float

    def __post_init__(self):
        for name in ("a", "omega0", "h", "c_z1", "c_z2", "k1", "k2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"ESC parameter {name} must be finite and positive, got {v}")

    def check_step(self, dt: float) -> None:
        if self.omega0 * dt > MAX_PHASE_STEP * (1 + 1e-12):
            raise ValidationError(
                f"dt={dt} too coarse for omega0={self.omega0}: need omega0*dt <= {MAX_PHASE_STEP}"
            )


@dataclass(frozen=True)
class WashoutState:
    lowpass: float = 0.0
    initialized: bool = False


def washout_step(state: WashoutState, J: float, dt: float, h: float) -> tuple[WashoutState, float]:
    """Advance the filter by ``dt`` with ``J`` held; return ``(state', Delta)``.

    An uninitialized filter latches onto the first measurement, so the very
    first output is zero instead of a step of size ``J``.
    """
    if not math.isfinite(J):
        raise ValidationError(f"measurement must be finite, got {J}")
    if not (dt > 0 and h > 0):
        raise ValidationError(f"dt and h must be positive, got dt={dt}, h={h}")
    ef = state.lowpass if state.initialized else J
    ef = J + (ef - J) * math.exp(-h * dt)
    return WashoutState(ef, True), J - ef


def estimate_gradient(delta: float, t: float, p: EscParams) -> PlanarVector:
    s, c = math.sin(p.omega0 * t), math.cos(p.omega0 * t)
    aw = p.a * p.omega0
    return PlanarVector(p.c_z1 * delta * s + aw * c, -p.c_z2 * delta * c + aw * s)


def compute_control(est: PlanarVector, theta: float, p: EscParams) -> ControlInput:
    c, s = math.cos(theta), math.sin(theta)
    # perp is (-Jz2, Jz1)
    u = p.k1 * (c * est.x + s * est.y)
    omega = -p.k2 * (-c * est.y + s * est.x)
    return ControlInput(u, omega)


def esc_controller(
    state: WashoutState, J: float, t: float, dt: float, p: EscParams, theta: float
) -> tuple[WashoutState, ControlInput, PlanarVector]:
    """One controller tick: washout, demodulate, steer.

    Returns the new filter state, the command, and the gradient estimate
    (the latter only for logging).
    """
    state, delta = washout_step(state, J, dt, p.h)
    est = estimate_gradient(delta, t, p)
    return state, compute_control(est, theta, p), est


@dataclass(frozen=True)
class EscController:
    """Controller handle for :func:`sourceseek.vehicle.simulate`."""

    params: EscParams

    kernel_code = 1

    def kernel_params(self) -> tuple[float, ...]:
        p = self.params
        return (p.a, p.omega0, p.h, p.c_z1, p.c_z2, p.k1, p.k2)
