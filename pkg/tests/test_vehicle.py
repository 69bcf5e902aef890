import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sourceseek import ControlInput, DomainError, PlanarVector, Pose, ValidationError
from sourceseek.averaging import lyapunov_ga
from sourceseek.controller_ga import GaController, GaGains
from sourceseek.field import FanPolynomial, NonQuadB, Quadratic
from sourceseek.vehicle import CSV_HEADER, Termination, Trajectory, simulate, step

GA = GaController(GaGains(1.0, 10.0))


class TestStep:
    def test_straight_line(self):
        assert step(Pose(0, 0, 0), ControlInput(1, 0), 0.1) == Pose(0.1, 0.0, 0.0)

    def test_pure_rotation(self):
        assert step(Pose(0, 0, 0), ControlInput(0, 1), 0.1) == Pose(0.0, 0.0, 0.1)

    def test_constant_arc(self):
        p = step(Pose(0, 0, 0), ControlInput(1, 1), 0.1)
        # closed form of the unit-speed, unit-rate arc
        assert p.z1 == pytest.approx(math.sin(0.1), abs=1e-7)
        assert p.z2 == pytest.approx(1 - math.cos(0.1), abs=1e-7)
        assert p.z1 == pytest.approx(0.0998334, abs=1e-7)
        assert p.z2 == pytest.approx(0.0049958, abs=1e-7)
        assert p.theta == pytest.approx(0.1, abs=1e-15)

    @given(
        st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10), st.floats(-5, 5), st.floats(1e-4, 1.0)
    )
    def test_straight_line_exact(self, x, y, th, u, dt):
        p = step(Pose(x, y, th), ControlInput(u, 0.0), dt)
        assert p.z1 == pytest.approx(x + u * dt * math.cos(th), abs=1e-12)
        assert p.z2 == pytest.approx(y + u * dt * math.sin(th), abs=1e-12)
        assert p.theta == th

    def test_heading_not_wrapped(self):
        p = Pose(0, 0, 0)
        for _ in range(100):
            p = step(p, ControlInput(0.0, 1.0), 0.1)
        assert p.theta == pytest.approx(10.0)

    def test_fourth_order(self):
        def run(dt):
            p = Pose(0.3, -0.2, 0.4)
            for _ in range(int(round(10 / dt))):
                p = step(p, ControlInput(1.3, 0.7), dt)
            return np.array([p.z1, p.z2])

        # exact circular arc with radius u/omega
        u, w, th0 = 1.3, 0.7, 0.4
        exact = np.array([0.3 + u / w * (math.sin(th0 + 7.0) - math.sin(th0)),
                          -0.2 - u / w * (math.cos(th0 + 7.0) - math.cos(th0))])
        dts = [0.2, 0.1, 0.05, 0.025]
        errs = [np.linalg.norm(run(dt) - exact) for dt in dts]
        order = np.polyfit(np.log(dts), np.log(errs), 1)[0]
        assert order >= 3.5

    def test_halving_dt_closed_form_free(self):
        # self-convergence without the exact solution
        def run(dt):
            p = Pose(1.0, 2.0, -0.3)
            for _ in range(int(round(10 / dt))):
                p = step(p, ControlInput(-0.8, 1.9), dt)
            return np.array([p.z1, p.z2])

        d1 = np.linalg.norm(run(0.1) - run(0.05))
        d2 = np.linalg.norm(run(0.05) - run(0.025))
        assert math.log2(d1 / d2) >= 3.5

    @pytest.mark.parametrize("dt", [0.0, -0.1, float("nan"), float("inf")])
    def test_bad_dt(self, dt):
        with pytest.raises(ValidationError):
            step(Pose(0, 0, 0), ControlInput(1, 0), dt)

    def test_nonfinite_inputs(self):
        with pytest.raises(ValidationError):
            Pose(0, float("inf"), 0)
        with pytest.raises(ValidationError):
            ControlInput(float("nan"), 0)


class TestSimulate:
    def test_equilibrium_at_maximizer(self, backend):
        f = Quadratic(center=PlanarVector(1.0, -2.0))
        tr = simulate(f, GA, Pose(1.0, -2.0, 0.7), 1e-3, 5.0, backend=backend)
        assert np.all(tr.positions == [1.0, -2.0])
        assert np.all(tr.column("u") == 0) and np.all(tr.column("omega") == 0)

    def test_converges_from_reference_start(self):
        tr = simulate(Quadratic(), GA, Pose.from_degrees(4, 3, 30), 1e-3, 100.0)
        assert tr.termination == Termination.COMPLETED
        assert np.hypot(*tr.positions[-1]) < 0.05

    def test_lyapunov_nonincreasing(self):
        tr = simulate(Quadratic(), GA, Pose.from_degrees(-3, 3, 45), 1e-3, 20.0)
        V = np.array([lyapunov_ga(J, 0.0, math.cos(th), math.sin(th)) for J, th in zip(tr.J, tr.theta)])
        assert np.max(np.diff(V)) <= 1e-6

    def test_reverse_approach(self):
        # with the -90 degree perpendicular the robot closes in backwards
        tr = simulate(Quadratic(), GA, Pose.from_degrees(4, 3, 30), 1e-3, 20.0)
        assert np.median(tr.column("u")[100:2000]) < 0

    def test_deterministic(self, backend):
        a = simulate(NonQuadB(), GA, Pose(0.5, 0.7, 1.0), 1e-3, 5.0, backend=backend)
        b = simulate(NonQuadB(), GA, Pose(0.5, 0.7, 1.0), 1e-3, 5.0, backend=backend)
        assert a.data.tobytes() == b.data.tobytes()

    def test_uniform_record(self):
        tr = simulate(Quadratic(), GA, Pose(1, 1, 0), 0.01, 1.0)
        assert len(tr) == 101
        assert np.allclose(np.diff(tr.t), 0.01)
        assert tr.t[-1] == pytest.approx(1.0)

    def test_record_every_keeps_ends(self):
        tr = simulate(Quadratic(), GA, Pose(1, 1, 0), 0.01, 1.05, record_every=10)
        assert tr.t[0] == 0.0 and tr.t[-1] == pytest.approx(1.05)
        assert len(tr) == 12

    def test_stop_within(self):
        tr = simulate(Quadratic(), GA, Pose(4, 3, 0.5), 1e-3, 100.0, stop_within=(PlanarVector(0, 0), 1.0))
        assert tr.termination == Termination.SETTLED
        assert np.hypot(*tr.positions[-1]) <= 1.0
        assert np.all(np.hypot(*tr.positions[:-1].T) > 1.0)

    def test_domain_exit_reported(self, backend):
        f = FanPolynomial()
        # inside the local minimum at d ~ 0.641 the gradient points at the fan
        tr = simulate(f, GaController(GaGains(1.0, 10.0)), Pose(0.6, 0.0, 0.0), 1e-3, 20.0, backend=backend)
        assert tr.termination == Termination.DOMAIN_EXIT
        assert tr.error and "exclusion" in tr.error
        assert tr.steps * 1e-3 < 20.0
        assert len(tr) > 0 and np.all(np.hypot(*tr.positions.T) >= f.d_min)

    def test_analytic_gradient_stalls_at_fan_ring(self):
        f = FanPolynomial()
        tr = simulate(f, GaController(GaGains(1.0, 10.0)), Pose(1.5, 0.0, 0.0), 1e-3, 30.0)
        assert tr.termination == Termination.COMPLETED
        assert np.hypot(*tr.positions[-1]) == pytest.approx(0.918, abs=0.01)

    def test_init_outside_domain(self):
        with pytest.raises(DomainError):
            simulate(FanPolynomial(), GA, Pose(0.1, 0, 0), 1e-3, 1.0)

    @pytest.mark.parametrize("dt, t_end", [(0.0, 1.0), (0.1, 0.05), (-1.0, 1.0)])
    def test_bad_times(self, dt, t_end):
        with pytest.raises(ValidationError):
            simulate(Quadratic(), GA, Pose(1, 1, 0), dt, t_end)

    def test_bad_gradient_source(self):
        with pytest.raises(ValidationError):
            simulate(Quadratic(), GA, Pose(1, 1, 0), 0.01, 1.0, gradient_source="oracle")


class TestTrajectoryCsv:
    def test_round_trip(self, tmp_path):
        tr = simulate(Quadratic(), GA, Pose(1, 1, 0.3), 0.01, 1.0)
        path = tmp_path / "t.csv"
        tr.to_csv(path)
        assert path.read_text().splitlines()[0] == "t,z1,z2,theta,u,omega,J,gx,gy"
        back = Trajectory.from_csv(path)
        assert back.data.tobytes() == tr.data.tobytes()
        assert back.dt == pytest.approx(0.01)

    def test_header_constant(self):
        assert ",".join(CSV_HEADER) == "t,z1,z2,theta,u,omega,J,gx,gy"

    def test_bad_header(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("a,b\n1,2\n")
        with pytest.raises(ValidationError):
            Trajectory.from_csv(p)
