#!/usr/bin/env python3
"""
デルタ記号のテスト
"""

from fractions import Fraction

import numpy as np
import pytest

from circle_method import delta
from circle_method.delta import DeltaKernel, FlatBump, HeathBrownKernel, W0Bump, make_kernel
from circle_method.poly import IntPolynomial
from circle_method.weights import WeightSpec, refine_midpoint
from common.exceptions import ArithmeticPreconditionError, ConfigError, GuardError


@pytest.fixture(scope="module")
def kernel10():
    return make_kernel(10, 0.5)


@pytest.fixture(scope="module")
def kernel20():
    return make_kernel(20, 0.5)


class TestBumps:
    def test_w0_has_unit_mass_on_its_support(self):
        w0 = W0Bump((0.5, 1.0))
        assert refine_midpoint(w0, 0.5, 1.0, 1 / 256, tol=1e-12).real == pytest.approx(1.0, rel=1e-9)
        assert w0(np.array([0.49, 1.01])).tolist() == [0.0, 0.0]

    def test_w0_support_validation(self):
        with pytest.raises(ConfigError):
            W0Bump((1.0, 0.5))

    def test_flat_bump_normalization(self):
        U = FlatBump(4)
        assert U(np.array([0.0]))[0] == pytest.approx(1.0)
        assert refine_midpoint(U, -0.5, 0.5, 1 / 256, tol=1e-12).real == pytest.approx(1.0, rel=1e-9)
        assert U(np.array([0.5, -0.6])).tolist() == [0.0, 0.0]

    def test_flat_bump_is_flat_at_origin(self):
        U = FlatBump(4)
        assert abs(U(np.array([0.01]))[0] - 1.0) < 1e-12

    def test_default_bump_is_gentle(self):
        U = FlatBump()
        assert U.m == 1
        assert U(np.array([0.0]))[0] == pytest.approx(1.0)
        assert refine_midpoint(U, -0.5, 0.5, 1 / 256, tol=1e-12).real == pytest.approx(1.0, rel=1e-9)
        assert float(np.max(U(np.linspace(-0.5, 0.5, 201)))) < 1.6

    @pytest.mark.parametrize("profile", ["standard", "square", "kaiser"])
    def test_every_w0_profile_has_unit_mass(self, profile):
        w0 = W0Bump((0.5, 1.0), profile)
        assert refine_midpoint(w0, 0.5, 1.0, 1 / 256, tol=1e-12).real == pytest.approx(1.0, rel=1e-9)
        assert float(np.min(w0(np.linspace(0.4, 1.1, 141)))) >= 0.0


class TestKernel:
    def test_support_predicate(self):
        assert delta.h_eval(1.5, 0.1) == 0.0
        assert delta.h_eval(3.0, 1.2) == 0.0

    def test_nonzero_inside_support(self, kernel10):
        assert delta.h_eval(0.3, 0.0, kernel10) != 0.0

    def test_x_must_be_positive(self):
        with pytest.raises(ArithmeticPreconditionError):
            delta.h_eval(0.0, 0.2)
        with pytest.raises(ArithmeticPreconditionError):
            delta.h_eval(-0.5, 0.2)

    def test_kernels_below_two_are_constructible(self):
        assert make_kernel(1).c_Q == 1.0
        assert np.isfinite(DeltaKernel(1.5).c_Q)
        assert delta.h_eval(0.9, 0.0, make_kernel(1)) == delta.h_eval(0.9, 0.0)

    @pytest.mark.parametrize("x, y", [(0.05, 0.0), (0.1, 0.13), (0.3, 0.2), (0.45, -0.4), (0.9, 0.0), (2.0, 1.5)])
    def test_h_matches_defining_series(self, x, y):
        w0 = W0Bump((0.5, 1.0), "kaiser")
        expected = 0.0
        for j in range(1, 200):
            expected += (float(w0(np.array([x * j]))[0]) - float(w0(np.array([abs(y) / (x * j)]))[0])) / (x * j)
        assert HeathBrownKernel(w0).h(x, np.array([y]))[0] == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_derivative_matches_difference_quotient(self, kernel10):
        step = 1e-6
        quotient = (delta.h_eval(0.3, 0.2 + step, kernel10) - delta.h_eval(0.3, 0.2 - step, kernel10)) / (2 * step)
        assert delta.h_dy_eval(0.3, 0.2, kernel10) == pytest.approx(quotient, rel=1e-4, abs=1e-6)

    def test_kernel_bound_scan_is_finite(self, kernel10):
        report = delta.kernel_bound_scan(kernel10, [0.05, 0.1, 0.25, 0.5, 1.0], np.linspace(-0.5, 0.5, 101))
        assert report["K"] > 0
        assert np.isfinite(report["ratio"])

    def test_parameter_validation(self):
        with pytest.raises(ArithmeticPreconditionError):
            DeltaKernel(10, theta=1.0)
        with pytest.raises(ArithmeticPreconditionError):
            DeltaKernel(0.5)
        with pytest.raises(ConfigError):
            DeltaKernel(10, c_q_mode="approximate")

    def test_unit_normalizer(self):
        assert DeltaKernel(10, c_q_mode="unit").c_Q == 1.0
        assert make_kernel(10).c_Q == pytest.approx(1.0, abs=0.05)


class TestArcWeights:
    def test_near_one_at_origin(self, kernel20):
        assert delta.p_q(kernel20, 1, 0.0) == pytest.approx(1.0, abs=0.05)

    def test_q_out_of_range(self, kernel10):
        with pytest.raises(ArithmeticPreconditionError):
            delta.p_q(kernel10, 11, 0.0)

    def test_scan_bound_symmetry_and_flatness(self, kernel20):
        z = [0.0, 1e-3, -1e-3, 1e-2, -1e-2, 5e-2]
        report = delta.p_q_scan(kernel20, z, q_values=[1, 2, 5])
        assert report["sup"] <= 2.0
        assert report["asymmetry"] <= 1e-6
        assert report["flatness"] <= 0.05
        assert report["passed"]


class TestDeltaApproximation:
    def test_ramanujan_identity(self):
        assert delta.ramanujan_identity_check(50, 100)["passed"]

    @pytest.mark.parametrize("n, expected, tol", [(0, 1.0, 1e-2), (7, 0.0, 1e-2), (64, 0.0, 2e-2)])
    def test_examples(self, kernel10, n, expected, tol):
        assert delta.delta_approx(kernel10, n) == pytest.approx(expected, abs=tol)

    def test_table_matches_single_values(self, kernel10):
        table = delta.delta_table(kernel10, [-3, 0, 5])
        assert table[1] == pytest.approx(delta.delta_approx(kernel10, 0), abs=1e-6)
        assert table[0] == pytest.approx(delta.delta_approx(kernel10, -3), abs=1e-6)

    def test_even_in_n(self, kernel10):
        table = delta.delta_table(kernel10, [-12, 12])
        assert table[0] == pytest.approx(table[1], abs=1e-12)

    def test_verify_delta_report(self):
        report = delta.verify_delta(10, 0.9)
        assert report["n_max"] == 100
        assert len(report["rows"]) == 201
        assert report["max_error"] <= 1e-2

    def test_wide_arcs_at_small_Q(self):
        # Q = 5 の誤差は z 積分の打ち切りで決まる
        wide = delta.verify_delta(5, 0.9)
        narrow = delta.verify_delta(5, 0.5)
        assert wide["max_error"] <= 1e-2
        assert wide["max_error"] < narrow["max_error"]

    @pytest.mark.slow
    def test_error_shrinks_with_Q(self):
        trend = delta.delta_error_trend((5, 10, 20), theta=0.9)
        assert all(m <= 1e-2 for m in trend["max_error"])
        assert trend["max_error"][-1] <= trend["max_error"][0] / 2


class TestColumnQuadrature:
    def test_tolerance_is_relative_for_small_integrals(self):
        def weight(u, scale=1.0):
            return scale * np.exp(-u ** 2)

        def kernel(u, c):
            return np.cos(3 * u * c)

        columns = np.array([1.0, 2.0])
        unit = delta._refine_columns(weight, kernel, columns, -1.0, 1.0, 0.5, 1e-8, 1e-12, 20)
        tiny = delta._refine_columns(lambda u: weight(u, 1e-9), kernel, columns, -1.0, 1.0, 0.5, 1e-8, 1e-12, 20)
        assert tiny / 1e-9 == pytest.approx(unit, rel=1e-6)

    def test_identically_zero_integrand_converges(self):
        out = delta._refine_columns(lambda u: np.zeros_like(u), lambda u, c: np.cos(u * c), np.array([0.0, 1.0]),
                                    -0.5, 0.5, 0.25, 1e-8, 1e-12, 4)
        assert out.tolist() == [0.0, 0.0]


class TestCountingIdentity:
    def test_linear_sanity_form(self):
        F = IntPolynomial(2, {(1, 0): 1, (0, 1): -1})
        W = WeightSpec.gamma_product([Fraction(1, 2), Fraction(1, 2)])
        report = delta.count_via_delta_check(F, W, 10, 20)
        assert report["direct"] > 0
        assert report["relative_error"] <= 0.02

    def test_no_zeros_in_support(self):
        F = IntPolynomial(1, {(4,): 1, (0,): 1})
        W = WeightSpec.gamma_product([Fraction(1, 2)])
        report = delta.count_via_delta_check(F, W, 8, 10)
        assert report["direct"] == 0.0
        assert abs(report["via_delta"]) <= 0.05

    def test_guard(self):
        F = IntPolynomial.diagonal([1] * 12)
        W = WeightSpec.gamma_product([Fraction(1, 2)] * 12)
        with pytest.raises(GuardError):
            delta.count_via_delta(F, W, 10, 5)
