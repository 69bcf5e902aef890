"""Pure-Python closed-loop kernels.

Built from the public per-step operations, so this backend doubles as the
reference the compiled core is tested against.  It is about two orders of
magnitude slower.
"""

from __future__ import annotations

import math

import numpy as np

from .._types import ControlInput, PlanarVector, Pose
from .. import controller_esc, controller_ga, sensors
from ..field import FanPolynomial, NonQuadA, NonQuadB, Quadratic

STATUS_COMPLETED = 0
STATUS_DOMAIN_EXIT = 1
STATUS_SETTLED = 2

N_COLUMNS = 9


def field_from_code(code: int, params) -> object:
    if code == 0:
        j_star, c1, c2, cx, cy = params
        return Quadratic(j_star, c1, c2, PlanarVector(cx, cy))
    if code == 1:
        return NonQuadA()
    if code == 2:
        return NonQuadB()
    if code == 3:
        *coeffs, r_f, cx, cy, d_min = params
        return FanPolynomial(tuple(coeffs), r_f, PlanarVector(cx, cy), d_min)
    raise ValueError(f"unknown field code {code}")


def rk4_step(z1: float, z2: float, theta: float, u: float, omega: float, dt: float) -> tuple[float, float, float]:
    # theta is linear in time under held controls, so the stages only
    # differ in the heading they sample
    th_mid = theta + 0.5 * dt * omega
    th_end = theta + dt * omega
    cm, sm = math.cos(th_mid), math.sin(th_mid)
    dz1 = dt / 6.0 * u * (math.cos(theta) + 4.0 * cm + math.cos(th_end))
    dz2 = dt / 6.0 * u * (math.sin(theta) + 4.0 * sm + math.sin(th_end))
    return z1 + dz1, z2 + dz2, th_end


def run_closed_loop(
    field_code, field_params, ctrl_code, ctrl_params, sensor_params, noise,
    z1, z2, theta, dt, n_steps, stride, settle_cx, settle_cy, settle_r,
):
    field = field_from_code(field_code, tuple(field_params))
    use_sensors = sensor_params[0] > 0
    if ctrl_code == 0:
        gains = controller_ga.GaGains(ctrl_params[0], ctrl_params[1])
    else:
        esc = controller_esc.EscParams(*ctrl_params)
        washout = controller_esc.WashoutState()
    if use_sensors:
        _, gain, bits, noise_std, baseline, eps = sensor_params
        cal = sensors.SensorCalibration(gain, 47600.0, int(bits) or None, noise_std, baseline, eps)
        proxy = sensors.GradientProxyState()
    noisy = use_sensors and noise_std > 0

    rows = []
    status = STATUS_COMPLETED
    settle_step = -1
    k = 0
    while True:
        t = k * dt
        p = PlanarVector(z1, z2)
        if field_code == 3 and field.distance(p) < field.d_min:
            status = STATUS_DOMAIN_EXIT
            break
        J = field.value(p)
        if ctrl_code == 0:
            if use_sensors:
                pose = Pose(z1, z2, theta)
                reading = sensors.measure(sensors.wind_at(field, pose), cal, noise=noise[k] if noisy else None)
                proxy, sample = sensors.gradient_proxy(reading, proxy, p, cal)
                g = sample.grad.rotate(theta)
            else:
                g = field.gradient(p)
                sample = controller_ga.GradientSample.from_gradient(g)
            ctl = controller_ga.compute_control(sample, theta, gains)
        else:
            washout, ctl, g = controller_esc.esc_controller(washout, J, t, dt, esc, theta)
        settled = settle_r >= 0 and math.hypot(z1 - settle_cx, z2 - settle_cy) <= settle_r
        if k % stride == 0 or k == n_steps or settled:
            rows.append((t, z1, z2, theta, ctl.u, ctl.omega, J, g.x, g.y))
        if settled:
            status = STATUS_SETTLED
            settle_step = k
            break
        if k == n_steps:
            break
        z1, z2, theta = rk4_step(z1, z2, theta, ctl.u, ctl.omega, dt)
        k += 1
    records = np.array(rows, dtype=np.float64).reshape(-1, N_COLUMNS)
    return records, status, k, settle_step


def averaged_rhs(s, p):
    zt1, zt2, z5, z6 = s
    a, w0, cz1, cz2, k1, k2, c1, c2 = p
    A = cz1 * c1 * zt1 * z5 + cz2 * c2 * zt2 * z6
    B = cz1 * c1 * zt1 * z6 - cz2 * c2 * zt2 * z5
    return (
        -a * k1 * z5 * A / w0,
        -a * k1 * z6 * A / w0,
        a * k2 * z6 * B / w0,
        -a * k2 * z5 * B / w0,
    )


def integrate_averaged(state, params, dtau, n_steps, stride):
    s = tuple(float(x) for x in state)
    p = tuple(float(x) for x in params)
    rows = [(0.0, *s)]
    for i in range(1, n_steps + 1):
        k1 = averaged_rhs(s, p)
        k2 = averaged_rhs(tuple(x + 0.5 * dtau * d for x, d in zip(s, k1)), p)
        k3 = averaged_rhs(tuple(x + 0.5 * dtau * d for x, d in zip(s, k2)), p)
        k4 = averaged_rhs(tuple(x + dtau * d for x, d in zip(s, k3)), p)
        s = tuple(x + dtau / 6.0 * (a + 2.0 * b + 2.0 * c + d) for x, a, b, c, d in zip(s, k1, k2, k3, k4))
        n = math.hypot(s[2], s[3])
        s = (s[0], s[1], s[2] / n, s[3] / n)
        if i % stride == 0 or i == n_steps:
            rows.append((i * dtau, *s))
    return np.array(rows, dtype=np.float64)
