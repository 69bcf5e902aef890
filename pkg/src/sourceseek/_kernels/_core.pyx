# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled closed-loop kernels.

Mirrors ``_fallback`` operation for operation; any change here needs the
matching change there (the backend-agreement tests compare both).
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, exp, hypot, floor, fabs, sqrt

cnp.import_array()

DEF N_COLUMNS = 9

cdef struct FieldEval:
    double J
    double gx
    double gy


cdef inline double fan_speed(const double[:] p, double R) noexcept nogil:
    return (((p[0] * R + p[1]) * R + p[2]) * R + p[3]) * R + p[4]


cdef inline double fan_dspeed(const double[:] p, double R) noexcept nogil:
    return ((4.0 * p[0] * R + 3.0 * p[1]) * R + 2.0 * p[2]) * R + p[3]


cdef inline FieldEval eval_field(int code, const double[:] p, double x, double y) noexcept nogil:
    cdef FieldEval out
    cdef double dx, dy, q, d, g
    if code == 0:
        dx = x - p[3]
        dy = y - p[4]
        out.J = p[0] - p[1] * dx * dx - p[2] * dy * dy
        out.gx = -2.0 * p[1] * dx
        out.gy = -2.0 * p[2] * dy
    elif code == 1:
        q = y * y - x * x * x
        out.J = -x * x - q * q
        out.gx = -2.0 * x + 6.0 * x * x * q
        out.gy = -4.0 * y * q
    elif code == 2:
        q = y - x * x
        out.J = -x * x - q * q
        out.gx = -2.0 * x + 4.0 * x * q
        out.gy = -2.0 * q
    else:
        dx = x - p[6]
        dy = y - p[7]
        d = hypot(dx, dy)
        out.J = fan_speed(p, p[5] / d)
        g = -fan_dspeed(p, p[5] / d) * p[5] / (d * d * d)
        out.gx = g * dx
        out.gy = g * dy
    return out


cdef inline double quantize(double s, double lsb, int bits) noexcept nogil:
    cdef double code, half
    if bits == 0:
        return s
    half = <double>(1 << (bits - 1))
    code = floor(s / lsb + 0.5)
    if code < -half:
        code = -half
    elif code > half - 1.0:
        code = half - 1.0
    return code * lsb


def run_closed_loop(
    int field_code, const double[:] field_params, int ctrl_code, const double[:] ctrl_params,
    const double[:] sensor_params, const double[:, :] noise,
    double z1, double z2, double theta, double dt, long n_steps, long stride,
    double settle_cx, double settle_cy, double settle_r,
):
    cdef long cap = n_steps // stride + 2
    cdef cnp.ndarray[cnp.float64_t, ndim=2] rec_arr = np.empty((cap, N_COLUMNS), dtype=np.float64)
    cdef double[:, :] rec = rec_arr
    cdef long m = 0, k = 0, settle_step = -1
    cdef int status = 0
    cdef bint use_sensors = sensor_params[0] > 0
    cdef bint noisy = use_sensors and sensor_params[3] > 0
    cdef bint settled
    cdef double t, u, om, gx, gy, c, s, d
    cdef FieldEval fe
    # controller constants
    cdef double k1 = 0, k2 = 0, a = 0, w0 = 0, h = 0, cz1 = 0, cz2 = 0, decay = 0
    cdef double ef = 0, delta, sw, cw
    cdef bint ef_init = False
    # sensor state
    cdef double gain = 0, lsb = 0, noise_std = 0, baseline = 0, eps = 0
    cdef int bits = 0
    cdef double wx, wy, bx, by, sp, s0, s1, s2, s3, sz1, sz2, sr, flow, kk
    cdef double prev_sr = 0, prev_x = 0, prev_y = 0, mag = 0, dl, mm
    cdef bint proxy_valid = False
    # integrator
    cdef double th_mid, th_end

    if ctrl_code == 0:
        k1 = ctrl_params[0]
        k2 = ctrl_params[1]
    else:
        a = ctrl_params[0]
        w0 = ctrl_params[1]
        h = ctrl_params[2]
        cz1 = ctrl_params[3]
        cz2 = ctrl_params[4]
        k1 = ctrl_params[5]
        k2 = ctrl_params[6]
        decay = exp(-h * dt)
    if use_sensors:
        gain = sensor_params[1]
        bits = <int>sensor_params[2]
        noise_std = sensor_params[3]
        baseline = sensor_params[4]
        eps = sensor_params[5]
        if bits > 0:
            lsb = 2.0 * gain / <double>(1 << bits)

    with nogil:
        while True:
            t = k * dt
            if field_code == 3 and hypot(z1 - field_params[6], z2 - field_params[7]) < field_params[8]:
                status = 1
                break
            fe = eval_field(field_code, field_params, z1, z2)
            c = cos(theta)
            s = sin(theta)
            if ctrl_code == 0:
                if use_sensors:
                    # world wind, then into the body frame
                    if field_code == 3:
                        wx = field_params[6] - z1
                        wy = field_params[7] - z2
                        d = hypot(wx, wy)
                        sp = fabs(fe.J) / d
                        wx = wx * sp
                        wy = wy * sp
                    else:
                        d = hypot(fe.gx, fe.gy)
                        if d == 0.0:
                            wx = 0.0
                            wy = 0.0
                        else:
                            sp = fabs(fe.J) / d
                            wx = fe.gx * sp
                            wy = fe.gy * sp
                    bx = c * wx + s * wy
                    by = -s * wx + c * wy
                    s0 = bx if bx > 0.0 else 0.0
                    s1 = by if by > 0.0 else 0.0
                    s2 = -bx if bx < 0.0 else 0.0
                    s3 = -by if by < 0.0 else 0.0
                    if noisy:
                        s0 = s0 + noise_std * noise[k, 0]
                        s1 = s1 + noise_std * noise[k, 1]
                        s2 = s2 + noise_std * noise[k, 2]
                        s3 = s3 + noise_std * noise[k, 3]
                    s0 = quantize(s0, lsb, bits)
                    s1 = quantize(s1, lsb, bits)
                    s2 = quantize(s2, lsb, bits)
                    s3 = quantize(s3, lsb, bits)
                    if s0 < 0.0:
                        s0 = 0.0
                    if s1 < 0.0:
                        s1 = 0.0
                    if s2 < 0.0:
                        s2 = 0.0
                    if s3 < 0.0:
                        s3 = 0.0
                    sz1 = s0 if s0 >= s2 else -s2
                    sz2 = s1 if s1 >= s3 else -s3
                    sr = hypot(sz1, sz2)
                    if not proxy_valid:
                        proxy_valid = True
                        prev_sr = sr
                        prev_x = z1
                        prev_y = z2
                        mag = sr
                    else:
                        dl = hypot(z1 - prev_x, z2 - prev_y)
                        if dl > 0.0 and dl >= baseline:
                            mm = fabs(sr - prev_sr) / dl
                            if mm > 0.0:
                                mag = mm
                            prev_sr = sr
                            prev_x = z1
                            prev_y = z2
                    flow = hypot(sz1, sz2)
                    if flow < eps:
                        bx = 0.0
                        by = 0.0
                    else:
                        kk = mag / flow
                        bx = sz1 * kk
                        by = sz2 * kk
                    # body frame: v = (1, 0), perp = (by, -bx)
                    u = k1 * bx
                    om = -k2 * by
                    gx = c * bx - s * by
                    gy = s * bx + c * by
                else:
                    gx = fe.gx
                    gy = fe.gy
                    u = k1 * (c * gx + s * gy)
                    om = -k2 * (c * gy - s * gx)
            else:
                if not ef_init:
                    ef = fe.J
                    ef_init = True
                ef = fe.J + (ef - fe.J) * decay
                delta = fe.J - ef
                sw = sin(w0 * t)
                cw = cos(w0 * t)
                gx = cz1 * delta * sw + a * w0 * cw
                gy = -cz2 * delta * cw + a * w0 * sw
                u = k1 * (c * gx + s * gy)
                om = -k2 * (-c * gy + s * gx)
            settled = settle_r >= 0.0 and hypot(z1 - settle_cx, z2 - settle_cy) <= settle_r
            if k % stride == 0 or k == n_steps or settled:
                rec[m, 0] = t
                rec[m, 1] = z1
                rec[m, 2] = z2
                rec[m, 3] = theta
                rec[m, 4] = u
                rec[m, 5] = om
                rec[m, 6] = fe.J
                rec[m, 7] = gx
                rec[m, 8] = gy
                m += 1
            if settled:
                status = 2
                settle_step = k
                break
            if k == n_steps:
                break
            th_mid = theta + 0.5 * dt * om
            th_end = theta + dt * om
            z1 = z1 + dt / 6.0 * u * (c + 4.0 * cos(th_mid) + cos(th_end))
            z2 = z2 + dt / 6.0 * u * (s + 4.0 * sin(th_mid) + sin(th_end))
            theta = th_end
            k += 1
    return rec_arr[:m].copy(), status, k, settle_step


cdef inline void avg_rhs(const double* s, const double* p, double* out) noexcept nogil:
    cdef double A = p[2] * p[6] * s[0] * s[2] + p[3] * p[7] * s[1] * s[3]
    cdef double B = p[2] * p[6] * s[0] * s[3] - p[3] * p[7] * s[1] * s[2]
    out[0] = -p[0] * p[4] * s[2] * A / p[1]
    out[1] = -p[0] * p[4] * s[3] * A / p[1]
    out[2] = p[0] * p[5] * s[3] * B / p[1]
    out[3] = -p[0] * p[5] * s[2] * B / p[1]


def integrate_averaged(state, params, double dtau, long n_steps, long stride):
    cdef double s[4]
    cdef double p[8]
    cdef double k1[4]
    cdef double k2[4]
    cdef double k3[4]
    cdef double k4[4]
    cdef double tmp[4]
    cdef long i, m = 1
    cdef int j
    cdef double n
    for j in range(4):
        s[j] = state[j]
    for j in range(8):
        p[j] = params[j]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out_arr = np.empty((n_steps // stride + 2, 5), dtype=np.float64)
    cdef double[:, :] out = out_arr
    out[0, 0] = 0.0
    for j in range(4):
        out[0, j + 1] = s[j]
    with nogil:
        for i in range(1, n_steps + 1):
            avg_rhs(s, p, k1)
            for j in range(4):
                tmp[j] = s[j] + 0.5 * dtau * k1[j]
            avg_rhs(tmp, p, k2)
            for j in range(4):
                tmp[j] = s[j] + 0.5 * dtau * k2[j]
            avg_rhs(tmp, p, k3)
            for j in range(4):
                tmp[j] = s[j] + dtau * k3[j]
            avg_rhs(tmp, p, k4)
            for j in range(4):
                s[j] = s[j] + dtau / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            n = hypot(s[2], s[3])
            s[2] = s[2] / n
            s[3] = s[3] / n
            if i % stride == 0 or i == n_steps:
                out[m, 0] = i * dtau
                for j in range(4):
                    out[m, j + 1] = s[j]
                m += 1
    return out_arr[:m].copy()
