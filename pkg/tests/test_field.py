import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sourceseek import DomainError, PlanarVector, ValidationError
from sourceseek.field import (
    FAN_COEFFS,
    FanPolynomial,
    NonQuadA,
    NonQuadB,
    Quadratic,
    evaluate,
    field_from_name,
    finite_diff_gradient,
    gradient,
    perp,
)

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)
vectors = st.builds(PlanarVector, finite, finite)


def fan_speed_exact(d):
    """Exact rational evaluation of the fan quartic, independent of Horner."""
    R = Fraction(45, 100) / Fraction(d)
    c = [Fraction(str(v)) for v in FAN_COEFFS]
    return float(sum(ci * R ** (4 - i) for i, ci in enumerate(c)))


class TestValues:
    def test_quadratic(self):
        assert evaluate(Quadratic(), PlanarVector(1, 1)) == -2.0

    def test_nonquad_b(self):
        assert evaluate(NonQuadB(), PlanarVector(1, 1)) == -1.0

    def test_fan_at_half_ratio(self):
        # R = 0.45 / 0.9 = 0.5
        assert fan_speed_exact("0.9") == pytest.approx(3.33125, abs=1e-12)
        assert evaluate(FanPolynomial(), PlanarVector(0.9, 0.0)) == pytest.approx(3.33125, abs=1e-12)

    @pytest.mark.parametrize("d", ["0.5", "0.75", "1.3", "2.0", "4.5"])
    def test_fan_matches_exact_rational(self, d):
        p = PlanarVector(float(d) * math.cos(0.3), float(d) * math.sin(0.3))
        assert evaluate(FanPolynomial(), p) == pytest.approx(fan_speed_exact(d), rel=1e-12)

    def test_shifted_quadratic(self):
        f = Quadratic(j_star=3.0, c1=2.0, c2=0.5, center=PlanarVector(1.0, -1.0))
        assert f.value(PlanarVector(1.0, -1.0)) == 3.0
        assert f.value(PlanarVector(2.0, 1.0)) == pytest.approx(3.0 - 2.0 - 2.0)


class TestGradients:
    def test_quadratic(self):
        assert gradient(Quadratic(), PlanarVector(1, 2)) == PlanarVector(-2, -4)

    def test_nonquad_b(self):
        assert gradient(NonQuadB(), PlanarVector(1, 1)) == PlanarVector(-2, 0)

    def test_fd_quadratic(self):
        g = finite_diff_gradient(Quadratic(), PlanarVector(1, 2), 1e-5)
        assert g.x == pytest.approx(-2, abs=1e-8) and g.y == pytest.approx(-4, abs=1e-8)

    def test_fd_nonquad_a_at_critical_point(self):
        g = finite_diff_gradient(NonQuadA(), PlanarVector(0, 0), 1e-5)
        assert abs(g.x) < 1e-9 and abs(g.y) < 1e-9

    def test_fd_nonquad_b(self):
        p = PlanarVector(0.5, 0.5)
        g, fd = gradient(NonQuadB(), p), finite_diff_gradient(NonQuadB(), p)
        assert (g - fd).norm() / g.norm() < 1e-6

    @pytest.mark.parametrize(
        "field, sampler",
        [
            (Quadratic(), lambda r: (r.uniform(-5, 5), r.uniform(-5, 5))),
            (NonQuadA(), lambda r: (r.uniform(-1, 1), r.uniform(-1, 1))),
            (NonQuadB(), lambda r: (r.uniform(-1, 1), r.uniform(-1, 1))),
            (FanPolynomial(), None),
        ],
        ids=["quadratic", "nonquad_a", "nonquad_b", "fan"],
    )
    def test_against_finite_differences(self, field, sampler):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            if sampler is None:
                d, phi = rng.uniform(0.51, 5.0), rng.uniform(0, 2 * math.pi)
                p = PlanarVector(d * math.cos(phi), d * math.sin(phi))
            else:
                p = PlanarVector(*sampler(rng))
            g = field.gradient(p)
            fd = finite_diff_gradient(field, p)
            assert (g - fd).norm() / max(g.norm(), 1.0) < 1e-6

    def test_fan_gradient_points_inward_far_out(self):
        # outside the local maximum ring speed grows as d shrinks
        g = FanPolynomial().gradient(PlanarVector(2.0, 0.0))
        assert g.x < 0 and g.y == 0.0

    def test_fan_gradient_points_outward_inside_ring(self):
        g = FanPolynomial().gradient(PlanarVector(0.75, 0.0))
        assert g.x > 0


class TestMaximizers:
    @pytest.mark.parametrize("field", [Quadratic(), NonQuadA(), NonQuadB()])
    def test_zero_gradient_and_global_max_on_grid(self, field):
        assert field.gradient(field.source) == PlanarVector(0.0, 0.0)
        jmax = field.value(field.source)
        xs = np.linspace(-3, 3, 61)
        assert max(field.value(PlanarVector(x, y)) for x in xs for y in xs) <= jmax

    def test_shifted_quadratic_source(self):
        f = Quadratic(center=PlanarVector(2.0, -1.0))
        assert f.gradient(f.source) == PlanarVector(0.0, 0.0)


class TestDomain:
    def test_inside_exclusion_radius(self):
        with pytest.raises(DomainError) as exc:
            evaluate(FanPolynomial(), PlanarVector(0.3, 0.0))
        assert exc.value.distance == pytest.approx(0.3)

    def test_gradient_at_fan(self):
        with pytest.raises(DomainError):
            gradient(FanPolynomial(), PlanarVector(0.0, 0.0))

    def test_boundary_is_inside_domain(self):
        FanPolynomial().value(PlanarVector(0.5, 0.0))

    def test_fd_propagates_domain_error(self):
        with pytest.raises(DomainError):
            finite_diff_gradient(FanPolynomial(), PlanarVector(0.5, 0.0), 1e-3)

    @pytest.mark.parametrize("kw", [{"c1": 0.0}, {"c2": -1.0}])
    def test_quadratic_curvature(self, kw):
        with pytest.raises(ValidationError):
            Quadratic(**kw)

    @pytest.mark.parametrize("kw", [{"r_f": 0.0}, {"d_min": -1.0}, {"coeffs": (1.0, 2.0)}])
    def test_fan_params(self, kw):
        with pytest.raises(ValidationError):
            FanPolynomial(**kw)

    def test_fd_step(self):
        with pytest.raises(ValidationError):
            finite_diff_gradient(Quadratic(), PlanarVector(0, 0), 0.0)

    def test_nonfinite_vector(self):
        with pytest.raises(ValidationError):
            PlanarVector(float("nan"), 0.0)


class TestPerp:
    @pytest.mark.parametrize(
        "g, expected", [((1, 0), (0, -1)), ((0, 1), (1, 0)), ((0, 0), (0, 0))]
    )
    def test_examples(self, g, expected):
        assert perp(PlanarVector(*g)) == PlanarVector(*expected)

    @given(vectors)
    def test_orthogonal(self, g):
        assert abs(perp(g).dot(g)) <= 1e-12 * max(g.dot(g), 1.0)

    @given(vectors)
    def test_norm_preserved(self, g):
        assert perp(g).norm() == g.norm()

    @given(vectors)
    def test_cross_sign(self, g):
        c = perp(g).cross(g)
        assert c >= 0
        assert c == pytest.approx(g.x**2 + g.y**2, rel=1e-12, abs=1e-300)
        assert (c == 0) == (g.x == 0 and g.y == 0) or g.norm() < 1e-150

    def test_perp_of_field_gradient(self):
        p = PlanarVector(0.3, -0.8)
        for f in (Quadratic(), NonQuadA(), NonQuadB()):
            g = f.gradient(p)
            assert abs(perp(g).dot(g)) <= 1e-12 * g.dot(g)


class TestFromName:
    def test_all_names(self):
        assert isinstance(field_from_name("quadratic", c1=2.0, center=[1, 2]), Quadratic)
        assert isinstance(field_from_name("nonquad_a"), NonQuadA)
        assert isinstance(field_from_name("nonquad_b"), NonQuadB)
        f = field_from_name("fan", coeffs=[1, 2, 3, 4, 5], center=[1, 1])
        assert f.coeffs == (1.0, 2.0, 3.0, 4.0, 5.0) and f.center == PlanarVector(1, 1)

    def test_unknown(self):
        with pytest.raises(ValidationError):
            field_from_name("gaussian")
