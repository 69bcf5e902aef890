"""Unicycle kinematics and the fixed-step closed-loop simulator.

``step`` advances ``z' = u (cos theta, sin theta)``, ``theta' = omega`` by one
RK4 step with the command held.  ``simulate`` runs the sample-and-hold loop:
query the gradient source, evaluate the controller, step.  The heavy loop
lives in :mod:`sourceseek._kernels`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import _kernels
from ._kernels import _fallback
from ._types import ControlInput, DomainError, PlanarVector, Pose, ValidationError, _check_finite
from .controller_esc import EscController
from .controller_ga import GaController
from .field import FanPolynomial, FieldSpec
from .sensors import SensorArray

__all__ = ["Pose", "ControlInput", "Trajectory", "step", "simulate", "CSV_HEADER", "Termination"]

CSV_HEADER = ("t", "z1", "z2", "theta", "u", "omega", "J", "gx", "gy")

Controller = Union[GaController, EscController]


class Termination:
    COMPLETED = "completed"
    DOMAIN_EXIT = "domain_exit"
    SETTLED = "settled"


_STATUS_NAMES = {
    _kernels.STATUS_COMPLETED: Termination.COMPLETED,
    _kernels.STATUS_DOMAIN_EXIT: Termination.DOMAIN_EXIT,
    _kernels.STATUS_SETTLED: Termination.SETTLED,
}


def step(pose: Pose, control: ControlInput, dt: float) -> Pose:
    _check_finite("dt", dt)
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    return Pose(*_fallback.rk4_step(pose.z1, pose.z2, pose.theta, control.u, control.omega, dt))


@dataclass
class Trajectory:
    """Recorded samples, one row per kept step, columns as in ``CSV_HEADER``.

    ``gx, gy`` is the gradient the controller acted on, in the world frame:
    the analytic gradient, the sensor estimate, or the ESC estimate.
    ``termination`` says why the run stopped; ``error`` carries the message
    when the run left the field's domain.
    """

    data: np.ndarray
    dt: float
    termination: str = Termination.COMPLETED
    error: Optional[str] = None
    steps: int = 0
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64).reshape(-1, len(CSV_HEADER))

    def __len__(self) -> int:
        return self.data.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.data[:, CSV_HEADER.index(name)]

    @property
    def t(self) -> np.ndarray:
        return self.data[:, 0]

    @property
    def positions(self) -> np.ndarray:
        return self.data[:, 1:3]

    @property
    def theta(self) -> np.ndarray:
        return self.data[:, 3]

    @property
    def J(self) -> np.ndarray:
        return self.data[:, 6]

    def pose(self, i: int) -> Pose:
        r = self.data[i]
        return Pose(float(r[1]), float(r[2]), float(r[3]))

    @property
    def final_pose(self) -> Pose:
        if len(self) == 0:
            raise ValidationError("empty trajectory")
        return self.pose(-1)

    def distances(self, source: PlanarVector) -> np.ndarray:
        return np.hypot(self.data[:, 1] - source.x, self.data[:, 2] - source.y)

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(CSV_HEADER) + "\n")
            for start in range(0, len(self), 65536):
                chunk = self.data[start : start + 65536].tolist()
                fh.write("".join(",".join(map(repr, row)) + "\n" for row in chunk))

    @classmethod
    def from_csv(cls, path: Union[str, Path], dt: Optional[float] = None) -> Trajectory:
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            if tuple(header) != CSV_HEADER:
                raise ValidationError(f"unexpected trajectory header {header}")
            data = np.array([[float(v) for v in row] for row in r], dtype=np.float64)
        if dt is None:
            dt = float(data[1, 0] - data[0, 0]) if len(data) > 1 else 0.0
        return cls(data, dt)


def simulate(
    field: FieldSpec,
    controller: Controller,
    init: Pose,
    dt: float,
    t_end: float,
    gradient_source: Union[str, SensorArray] = "analytic",
    *,
    record_every: int = 1,
    stop_within: Optional[tuple[PlanarVector, float]] = None,
    backend: Optional[str] = None,
) -> Trajectory:
    """Run the sample-and-hold closed loop from ``init`` until ``t_end``.

    ``gradient_source`` is ``"analytic"`` or a :class:`SensorArray` (GA only;
    ESC measures ``J`` directly).  ``record_every`` thins the record; the
    first and last samples are always kept.  ``stop_within=(center, r)``
    ends the run at the first sample within ``r`` of ``center``.

    A run on the fan field that reaches the exclusion radius stops there with
    ``termination == "domain_exit"``; the record up to that point is kept.
    """
    _check_finite("dt/t_end", dt, t_end)
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    if not t_end >= dt:
        raise ValidationError(f"t_end must be >= dt, got t_end={t_end}, dt={dt}")
    if not (isinstance(record_every, int) and record_every >= 1):
        raise ValidationError(f"record_every must be a positive integer, got {record_every!r}")
    if isinstance(controller, EscController):
        controller.params.check_step(dt)
        if gradient_source != "analytic":
            raise ValidationError("the ESC controller measures J directly; sensor gradients apply to GA only")
    elif not isinstance(controller, GaController):
        raise ValidationError(f"unsupported controller {controller!r}")
    field.value(init.position)  # domain check, raises DomainError

    n_steps = int(round(t_end / dt))
    if gradient_source == "analytic":
        sensor_params = np.zeros(6)
        noise = np.zeros((0, 4))
    elif isinstance(gradient_source, SensorArray):
        sensor_params = np.asarray(gradient_source.kernel_params(), dtype=np.float64)
        if gradient_source.calibration.noise_std > 0:
            rng = np.random.Generator(np.random.Philox(gradient_source.seed))
            noise = rng.standard_normal((n_steps + 1, 4))
        else:
            noise = np.zeros((0, 4))
    else:
        raise ValidationError(f"gradient_source must be 'analytic' or a SensorArray, got {gradient_source!r}")

    if stop_within is None:
        cx, cy, r = 0.0, 0.0, -1.0
    else:
        center, r = stop_within
        cx, cy = center.x, center.y

    kern = _kernels.get_backend(backend)
    records, status, steps, _ = kern.run_closed_loop(
        field.kernel_code,
        np.asarray(field.kernel_params(), dtype=np.float64),
        controller.kernel_code,
        np.asarray(controller.kernel_params(), dtype=np.float64),
        sensor_params,
        noise,
        float(init.z1),
        float(init.z2),
        float(init.theta),
        float(dt),
        n_steps,
        record_every,
        float(cx),
        float(cy),
        float(r),
    )
    error = None
    termination = _STATUS_NAMES[status]
    if termination == Termination.DOMAIN_EXIT:
        assert isinstance(field, FanPolynomial)
        error = f"entered the fan exclusion radius {field.d_min} m at t={steps * dt:.6g} s"
    return Trajectory(records, dt, termination, error, steps)
