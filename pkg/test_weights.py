#!/usr/bin/env python3
"""
重み関数のテスト
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from circle_method import weights
from circle_method.weights import WeightSpec, derivative_bound, fourier, gamma_derivative, mass
from common.exceptions import WeightError


@pytest.fixture
def omega2():
    return WeightSpec.gamma_product([Fraction(1, 2), Fraction(1, 3)])


class TestEvaluation:
    @pytest.mark.parametrize("profile", ["square", "abs"])
    def test_center_value(self, profile):
        w = WeightSpec.gamma_product([Fraction(1, 2)] * 3, profile=profile)
        assert weights.eval(w, [0.5, 0.5, 0.5]) == pytest.approx(math.exp(-3), rel=1e-12)

    def test_outside_support_is_zero(self, omega2):
        assert weights.eval(omega2, [0.5 + 0.25, 1 / 3]) == 0.0
        assert weights.eval(omega2, [0.5, 1 / 3 - 0.3]) == 0.0

    def test_abs_profile_midpoint(self):
        w = WeightSpec.gamma_product([Fraction(1, 2), Fraction(1, 2)], profile="abs")
        assert weights.eval(w, [0.5 + 0.125, 0.5]) == pytest.approx(math.exp(-1) * math.exp(-4), rel=1e-12)

    @given(st.floats(-2, 2), st.floats(-2, 2))
    def test_non_negative_and_supported(self, a, b):
        w = WeightSpec.gamma_product([Fraction(1, 2), Fraction(1, 3)])
        value = weights.eval(w, [a, b])
        assert value >= 0
        if abs(a - 0.5) >= 0.25 or abs(b - 1 / 3) >= 0.25:
            assert value == 0.0

    def test_differenced_is_product_of_shifts(self, omega2):
        P = 16
        Wh = omega2.differenced((1, -2), P)
        y = [0.52, 0.4]
        expected = weights.eval(omega2, [y[0] + 1 / P, y[1] - 2 / P]) * weights.eval(omega2, y)
        assert weights.eval(Wh, y) == pytest.approx(expected, rel=1e-12)

    def test_differenced_support_box_shrinks(self, omega2):
        (lo, hi), _ = omega2.differenced((2, 0), 8).support_box()
        assert lo == pytest.approx(0.25)
        assert hi == pytest.approx(0.5)


class TestSpec:
    def test_rho_range(self):
        with pytest.raises(WeightError):
            WeightSpec.gamma_product([0], rho=Fraction(3, 2))
        with pytest.raises(WeightError):
            WeightSpec.gamma_product([0], rho=0)

    def test_unknown_profile(self):
        with pytest.raises(WeightError):
            WeightSpec.gamma_product([0], profile="cosine")

    def test_json_round_trip_of_differenced_weight(self, omega2):
        Wh = omega2.differenced((1, 0), 10)
        data = Wh.to_json()
        assert data == {"kind": "differenced", "x0": ["1/2", "1/3"], "rho": "1/4", "profile": "square",
                        "shift": [1, 0], "P": 10}
        assert WeightSpec.from_json(data) == Wh

    def test_json_uses_config_defaults(self):
        w = WeightSpec.from_json({"x0": ["1/2"]})
        assert w.rho == Fraction(1, 4)
        assert w.profile == "square"

    def test_malformed_json(self):
        with pytest.raises(WeightError):
            WeightSpec.from_json({"rho": "1/4"})


class TestDerivativeBound:
    def test_order_zero_is_sup(self):
        w = WeightSpec.gamma_product([Fraction(1, 2)] * 4)
        assert derivative_bound(w, 0) == pytest.approx(math.exp(-4))

    def test_order_one_matches_finite_differences(self):
        w = WeightSpec.gamma_product([Fraction(0)], rho=1)
        x = np.linspace(-1, 1, 200001)
        fd = np.max(np.abs(np.gradient(weights.gamma(x), x)))
        assert derivative_bound(w, 1, safety_factor=Fraction(1)) == pytest.approx(fd, rel=1e-2)
        assert derivative_bound(w, 1) > derivative_bound(w, 1, safety_factor=Fraction(1))

    def test_differenced_order_zero(self, omega2):
        base = derivative_bound(omega2, 0)
        assert derivative_bound(omega2.differenced((1, 1), 10), 0) <= base ** 2 * (1 + 1e-12)

    def test_order_beyond_max(self, omega2):
        with pytest.raises(WeightError):
            derivative_bound(omega2, 9)

    @given(st.floats(-0.6, 0.6), st.integers(1, 2))
    def test_analytic_derivatives_match_finite_differences(self, x, order):
        h = 1e-4
        lower = gamma_derivative("square", order - 1)
        fd = (lower(np.array([x + h])) - lower(np.array([x - h])))[0] / (2 * h)
        exact = gamma_derivative("square", order)(np.array([x]))[0]
        assert fd == pytest.approx(exact, rel=1e-4, abs=1e-6)


class TestFourier:
    def test_zero_frequency_is_mass(self, omega2):
        value = fourier(omega2, [0.0, 0.0])
        assert value.real > 0
        assert abs(value.imag) < 1e-12
        refined = fourier(omega2, [0.0, 0.0], quad_step=1 / 512, tol=1e-12)
        assert value.real == pytest.approx(refined.real, rel=1e-6)

    def test_conjugate_symmetry(self, omega2):
        t = [3.5, -1.25]
        plus = fourier(omega2, t)
        minus = fourier(omega2, [-x for x in t])
        assert minus == pytest.approx(plus.conjugate(), abs=1e-9)

    def test_decay(self):
        w = WeightSpec.gamma_product([Fraction(1, 2)])
        profile = weights.fourier_decay_profile(w, 4, np.linspace(0, 40, 41))
        assert np.all(profile <= 1e3 * profile[1])

    def test_mass_factorizes(self, omega2):
        one = mass(WeightSpec.gamma_product([Fraction(1, 2)]))
        assert mass(omega2) == pytest.approx(one ** 2, rel=1e-9)
