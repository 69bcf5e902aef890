"""Emulated four-cantilever flow sensor array and its gradient proxy.

The array sits on the robot body: sensor 1 faces forward, 2 left, 3 rear,
4 right.  A flow component along an axis bends only the cantilever it hits,
so each reading is a nonnegative magnitude.  The pipeline is::

    wind_at  ->  measure  ->  gradient_proxy  ->  GradientSample (body frame)

Each reading goes through a resistance round trip.  The linear calibration
``s = gain * dR/R0`` is inverted, then a mid-scale ADC quantizes ``dR/R0`` over
``[-1, 1]``, and the result is mapped back to m/s.

The gradient magnitude is a dirty derivative: the change in total flow
``s_r`` divided by the odometry distance covered since the last reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._types import ORIGIN, PlanarVector, Pose, ValidationError
from .controller_ga import GradientSample
from .field import FanPolynomial, FieldSpec

__all__ = [
    "SensorCalibration",
    "SensorFrameReading",
    "GradientProxyState",
    "SensorArray",
    "wind_at",
    "measure",
    "quantize",
    "to_resistance_change",
    "gradient_proxy",
]


@dataclass(frozen=True)
class SensorCalibration:
    """Sensor model parameters.

    ``adc_bits=None`` disables quantization.  ``baseline`` is the minimum
    odometry distance between two dirty-derivative references, ``eps`` the
    flow-norm floor below which the direction is treated as unknown.
    """

    gain: float = 23.80
    r0: float = 47600.0
    adc_bits: Optional[int] = 10
    noise_std: float = 0.0
    baseline: float = 0.02
    eps: float = 1e-6

    def __post_init__(self):
        if not (self.gain > 0 and self.r0 > 0):
            raise ValidationError(f"gain and r0 must be positive, got gain={self.gain}, r0={self.r0}")
        if self.adc_bits is not None and not (isinstance(self.adc_bits, int) and 8 <= self.adc_bits <= 16):
            raise ValidationError(f"adc_bits must be an integer in [8, 16] or None, got {self.adc_bits!r}")
        if not (self.noise_std >= 0 and math.isfinite(self.noise_std)):
            raise ValidationError(f"noise_std must be finite and >= 0, got {self.noise_std}")
        if not (self.baseline >= 0 and self.eps > 0):
            raise ValidationError("baseline must be >= 0 and eps > 0")

    @property
    def lsb(self) -> float:
        """Quantization step in m/s (zero when quantization is off)."""
        if self.adc_bits is None:
            return 0.0
        return 2.0 * self.gain / (1 << self.adc_bits)


@dataclass(frozen=True)
class SensorFrameReading:
    s: tuple[float, float, float, float]
    s_z1r: float
    s_z2r: float
    s_r: float


@dataclass(frozen=True)
class GradientProxyState:
    """Dirty-derivative memory.

    ``magnitude`` is the last gradient magnitude estimate.  It is held
    between reference updates so that the robot keeps moving while it
    accumulates the baseline distance.
    """

    prev_s_r: float = 0.0
    prev_position_odom: PlanarVector = ORIGIN
    valid: bool = False
    magnitude: float = 0.0


def wind_at(field: FieldSpec, pose: Pose) -> PlanarVector:
    """Emulated wind in the body frame.

    The wind points along the ascent direction of ``J`` with magnitude
    ``|J|``.  For the fan this is the unit vector towards the fan center
    with the fitted speed, which also holds inside the fit's
    non-monotone ring.
    """
    p = pose.position
    if isinstance(field, FanPolynomial):
        d = field.distance(p)
        speed = abs(field.value(p))
        w = (field.center - p).scale(speed / d)
    else:
        g = field.gradient(p)
        n = g.norm()
        if n == 0.0:
            return ORIGIN
        w = g.scale(abs(field.value(p)) / n)
    return w.rotate(-pose.theta)


def to_resistance_change(s: float, cal: SensorCalibration) -> float:
    """Flow speed (m/s) to resistance change in ohms."""
    return s / cal.gain * cal.r0


def quantize(s: float, cal: SensorCalibration) -> float:
    if cal.adc_bits is None:
        return s
    half = 1 << (cal.adc_bits - 1)
    code = math.floor(s / cal.lsb + 0.5)
    code = min(max(code, -half), half - 1)
    return code * cal.lsb


def measure(
    wind_body: PlanarVector,
    cal: SensorCalibration,
    rng: Optional[np.random.Generator] = None,
    noise: Optional[Sequence[float]] = None,
) -> SensorFrameReading:
    """Read the four sensors.

    ``noise`` may carry four standard-normal draws (one per sensor) instead of
    an ``rng``; the simulation kernels use this to share one noise stream.
    """
    raw = (max(wind_body.x, 0.0), max(wind_body.y, 0.0), max(-wind_body.x, 0.0), max(-wind_body.y, 0.0))
    if cal.noise_std > 0:
        if noise is None:
            if rng is None:
                raise ValidationError("noise_std > 0 needs an rng or explicit noise draws")
            noise = rng.standard_normal(4)
        raw = tuple(r + cal.noise_std * float(n) for r, n in zip(raw, noise))
    s = tuple(max(quantize(r, cal), 0.0) for r in raw)
    s_z1r = s[0] if s[0] >= s[2] else -s[2]
    s_z2r = s[1] if s[1] >= s[3] else -s[3]
    return SensorFrameReading(s, s_z1r, s_z2r, math.hypot(s_z1r, s_z2r))


def gradient_proxy(
    reading: SensorFrameReading,
    state: GradientProxyState,
    odom_position: PlanarVector,
    cal: SensorCalibration = SensorCalibration(),
) -> tuple[GradientProxyState, GradientSample]:
    """Body-frame gradient from one reading.

    Direction comes from ``(s_z1r, s_z2r)``.  The magnitude is
    ``|s_r - prev_s_r| / delta``, refreshed only once the robot has moved at
    least ``cal.baseline`` since the previous reference and held otherwise.
    On the very first call the flow norm itself seeds the magnitude.
    """
    if not state.valid:
        state = GradientProxyState(reading.s_r, odom_position, True, reading.s_r)
    else:
        delta = (odom_position - state.prev_position_odom).norm()
        if delta > 0 and delta >= cal.baseline:
            m = abs(reading.s_r - state.prev_s_r) / delta
            state = GradientProxyState(reading.s_r, odom_position, True, m if m > 0 else state.magnitude)
    flow = math.hypot(reading.s_z1r, reading.s_z2r)
    if flow < cal.eps:
        g = ORIGIN
    else:
        k = state.magnitude / flow
        g = PlanarVector(reading.s_z1r * k, reading.s_z2r * k)
    return state, GradientSample.from_gradient(g, frame="body")


@dataclass(frozen=True)
class SensorArray:
    """Gradient source for :func:`sourceseek.vehicle.simulate` backed by the emulated array."""

    calibration: SensorCalibration = SensorCalibration()
    seed: int = 0

    def kernel_params(self) -> tuple[float, ...]:
        c = self.calibration
        return (1.0, c.gain, float(c.adc_bits or 0), c.noise_std, c.baseline, c.eps)
