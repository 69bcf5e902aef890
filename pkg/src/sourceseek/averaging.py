"""Averaged ESC dynamics, Lyapunov functions, and full-vs-averaged comparison.

In the slow time ``tau = omega0 * t``, with position error ``zt`` and heading
error ``(z5, z6) = (cos, sin)``, the one-period average of the dithered ESC
loop on a quadratic field is::

    A = Cz1 c1 zt1 z5 + Cz2 c2 zt2 z6
    B = Cz1 c1 zt1 z6 - Cz2 c2 zt2 z5

    zt1' = -(a k1 / w0) z5 A        z5' =  (a k2 / w0) z6 B
    zt2' = -(a k1 / w0) z6 A        z6' = -(a k2 / w0) z5 B

It conserves ``z5^2 + z6^2`` and decreases
``V = (Cz1 c1 zt1^2 + Cz2 c2 zt2^2 + z5^2 + z6^2) / 2`` at the rate
``-(a k1 / w0) A^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from ._types import Pose, ValidationError
from .controller_esc import EscController, EscParams
from .field import Quadratic
from .vehicle import Trajectory, simulate

__all__ = [
    "AveragedState",
    "AveragingParams",
    "AveragingReport",
    "averaged_rhs",
    "lyapunov_ga",
    "lyapunov_esc",
    "lyapunov_esc_rate",
    "integrate_averaged",
    "moving_average",
    "compare_full_vs_averaged",
]

_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class AveragedState:
    zt1: float
    zt2: float
    z5: float
    z6: float

    def __post_init__(self):
        if abs(self.z5 * self.z5 + self.z6 * self.z6 - 1.0) > _UNIT_TOL:
            raise ValidationError(f"(z5, z6) must lie on the unit circle, got ({self.z5}, {self.z6})")

    @classmethod
    def from_heading(cls, zt1: float, zt2: float, theta: float) -> AveragedState:
        return cls(zt1, zt2, math.cos(theta), math.sin(theta))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.zt1, self.zt2, self.z5, self.z6)


@dataclass(frozen=True)
class AveragingParams:
    a: float
    omega0: float
    c_z1: float
    c_z2: float
    k1: float
    k2: float
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self):
        for name in ("a", "omega0", "c_z1", "c_z2", "k1", "k2", "c1", "c2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be finite and positive, got {v}")

    @classmethod
    def from_esc(cls, p: EscParams, field: Quadratic) -> AveragingParams:
        return cls(p.a, p.omega0, p.c_z1, p.c_z2, p.k1, p.k2, field.c1, field.c2)

    def as_tuple(self) -> tuple[float, ...]:
        return (self.a, self.omega0, self.c_z1, self.c_z2, self.k1, self.k2, self.c1, self.c2)


def _brackets(s: AveragedState, p: AveragingParams) -> tuple[float, float]:
    w1 = p.c_z1 * p.c1 * s.zt1
    w2 = p.c_z2 * p.c2 * s.zt2
    return w1 * s.z5 + w2 * s.z6, w1 * s.z6 - w2 * s.z5


def averaged_rhs(s: AveragedState, p: AveragingParams) -> tuple[float, float, float, float]:
    """``d/dtau`` of ``(zt1, zt2, z5, z6)``."""
    A, B = _brackets(s, p)
    g1 = p.a * p.k1 / p.omega0
    g2 = p.a * p.k2 / p.omega0
    return (-g1 * s.z5 * A, -g1 * s.z6 * A, g2 * s.z6 * B, -g2 * s.z5 * B)


def lyapunov_ga(J_value: float, J_star: float, z3: float, z4: float) -> float:
    """``V = -J + (z3^2 + z4^2)/2 + J*`` with ``(z3, z4)`` the heading vector."""
    return -J_value + 0.5 * (z3 * z3 + z4 * z4) + J_star


def lyapunov_esc(s: AveragedState, p: AveragingParams) -> float:
    return 0.5 * (p.c_z1 * p.c1 * s.zt1**2 + p.c_z2 * p.c2 * s.zt2**2 + s.z5**2 + s.z6**2)


def lyapunov_esc_rate(s: AveragedState, p: AveragingParams) -> float:
    """Closed-form ``dV/dtau`` along :func:`averaged_rhs`."""
    A, _ = _brackets(s, p)
    return -(p.a * p.k1 / p.omega0) * A * A


def integrate_averaged(
    init: AveragedState,
    p: AveragingParams,
    tau_end: float,
    dtau: float = 0.01,
    record_every: int = 1,
    backend: Optional[str] = None,
) -> np.ndarray:
    """RK4 in ``tau`` with the heading renormalized each step.

    Returns rows ``(tau, zt1, zt2, z5, z6)``.
    """
    if not (dtau > 0 and tau_end >= dtau):
        raise ValidationError(f"need 0 < dtau <= tau_end, got dtau={dtau}, tau_end={tau_end}")
    n = int(round(tau_end / dtau))
    kern = _kernels.get_backend(backend)
    return kern.integrate_averaged(init.as_tuple(), p.as_tuple(), float(dtau), n, int(record_every))


def moving_average(traj: Trajectory, omega0: float, k: int = 1) -> Trajectory:
    """Rectangular sliding mean over ``k`` dither periods, stamped at the window start.

    Every column except ``t`` is averaged.  The trajectory must be recorded
    at every step (uniform spacing ``traj.dt``).
    """
    if not (isinstance(k, int) and k >= 1):
        raise ValidationError(f"k must be a positive integer, got {k!r}")
    if not omega0 > 0:
        raise ValidationError(f"omega0 must be positive, got {omega0}")
    if len(traj) > 1 and abs(traj.t[1] - traj.t[0] - traj.dt) > 1e-9 * max(1.0, traj.dt):
        raise ValidationError("moving_average needs a trajectory recorded at every step")
    m = int(round(2.0 * math.pi * k / (omega0 * traj.dt)))
    if m < 1 or m > len(traj):
        raise ValidationError(
            f"averaging window of {m} samples does not fit a trajectory of {len(traj)} samples"
        )
    data = traj.data
    csum = np.vstack([np.zeros((1, data.shape[1])), np.cumsum(data, axis=0)])
    out = (csum[m:] - csum[:-m]) / m
    out[:, 0] = data[: out.shape[0], 0]
    return Trajectory(out, traj.dt, traj.termination, traj.error, traj.steps, {"window": m})


@dataclass
class AveragingReport:
    """Full-loop moving average against the averaged ODE, on a common time grid.

    ``table`` columns are ``tau, zt1, zt2, z1avg_full, z2avg_full, err``, with
    ``zt`` relative to the source and the full-loop mean in absolute
    coordinates (identical frames when the source is at the origin).
    """

    table: np.ndarray
    sup_error: float
    omega0: float
    full: Trajectory
    averaged: np.ndarray

    COLUMNS = ("tau", "zt1", "zt2", "z1avg_full", "z2avg_full", "err")


def compare_full_vs_averaged(
    field: Quadratic,
    params: EscParams,
    init: Pose,
    horizon: float,
    dt: float = 1e-3,
    window_periods: int = 1,
    dtau: float = 0.01,
    backend: Optional[str] = None,
) -> AveragingReport:
    """Run the dithered loop and the averaged ODE from matched initial conditions.

    The error variable is ``zt = z - z* + a (-sin w0 t, cos w0 t)``, so it
    starts at ``init - z* + (0, a)``.  The dither term has zero mean over a
    period, which makes the averaged ``zt`` directly comparable with the
    windowed mean of ``z - z*``.
    """
    if not isinstance(field, Quadratic):
        raise ValidationError("the averaged model is only valid on a quadratic field")
    params.check_step(dt)
    full = simulate(field, EscController(params), init, dt, horizon, backend=backend)
    avg_full = moving_average(full, params.omega0, window_periods)

    ap = AveragingParams.from_esc(params, field)
    s0 = AveragedState.from_heading(init.z1 - field.center.x, init.z2 - field.center.y + params.a, init.theta)
    tau_end = horizon * params.omega0
    avg = integrate_averaged(s0, ap, tau_end, dtau, backend=backend)

    t_full = avg_full.t
    tau = t_full * params.omega0
    zt1 = np.interp(tau, avg[:, 0], avg[:, 1])
    zt2 = np.interp(tau, avg[:, 0], avg[:, 2])
    p1 = zt1 + field.center.x
    p2 = zt2 + field.center.y
    f1 = avg_full.data[:, 1]
    f2 = avg_full.data[:, 2]
    err = np.hypot(f1 - p1, f2 - p2)
    table = np.column_stack([tau, zt1, zt2, f1, f2, err])
    return AveragingReport(table, float(err.max()), params.omega0, full, avg)
