#!/usr/bin/env python3
"""
局所密度のテスト
"""

import math

import pytest

from circle_method import local
from circle_method.local import (D_weight, SingularIntegralPartial, SingularSeriesPartial, lemma20_check, main_term,
                                 singular_integral, singular_series, singular_series_term)
from circle_method.poly import IntPolynomial
from circle_method.acceptance import demo_form
from common.config_loader import activate_config, load_config
from common.exceptions import ArithmeticPreconditionError, GuardError, PolynomialError, QuadratureError


@pytest.fixture
def diag3():
    return IntPolynomial.diagonal([1, 2, -3], 4)


class TestSeriesTerms:
    def test_first_term(self, diag3):
        assert singular_series_term(diag3, 1) == 1.0
        assert singular_series_term(diag3, 1, local.GENERIC) == 1.0

    @pytest.mark.parametrize("q", [2, 3, 4, 5, 8, 9, 12, 16])
    def test_diagonal_fast_agrees_with_generic(self, diag3, q):
        fast = singular_series_term(diag3, q, local.DIAGONAL_FAST)
        exact = singular_series_term(diag3, q, local.GENERIC)
        assert fast == pytest.approx(exact, abs=1e-10)

    def test_sum_of_two_squares(self):
        F = IntPolynomial.diagonal([1, 1], 2)
        assert singular_series_term(F, 3, local.GENERIC) == pytest.approx(-2 / 3)
        assert singular_series_term(F, 5, local.GENERIC) == pytest.approx(4 / 5)

    def test_one_variable_sum(self):
        assert local.diagonal_one_variable_sum(5, 0) == pytest.approx(5)
        assert local.diagonal_one_variable_sum(7, 14) == pytest.approx(7)

    def test_mode_validation(self, diag3):
        with pytest.raises(ArithmeticPreconditionError):
            singular_series_term(diag3, 3, "fast")
        mixed = diag3 + IntPolynomial(3, {(1, 1, 2): 1})
        with pytest.raises(PolynomialError):
            singular_series_term(mixed, 3, local.DIAGONAL_FAST)

    def test_generic_guard(self):
        F = IntPolynomial.diagonal([1] * 8, 4) + IntPolynomial(8, {(1, 1, 1, 1, 0, 0, 0, 0): 1})
        with pytest.raises(GuardError):
            singular_series_term(F, 20)

    def test_terms_are_multiplicative(self, diag3):
        report = local.series_multiplicativity_check(diag3, q_max=60)
        assert report["checked"] > 0
        assert report["passed"]


class TestSingularSeries:
    def test_partial_sum_report(self, diag3):
        partial = singular_series(diag3, 12)
        assert partial.mode == local.DIAGONAL_FAST
        assert [q for q, _ in partial.terms] == list(range(1, 13))
        assert partial.value == pytest.approx(math.fsum(t for _, t in partial.terms))
        assert partial.to_dict()["R"] == 12

    def test_modes_agree_on_partial_sum(self, diag3):
        fast = singular_series(diag3, 10, local.DIAGONAL_FAST).value
        generic = singular_series(diag3, 10, local.GENERIC).value
        assert fast == pytest.approx(generic, abs=1e-9)

    def test_convergence_needs_two_rungs(self, diag6):
        with pytest.raises(ArithmeticPreconditionError):
            local.series_convergence(diag6, [50])

    def test_convergence_rows(self, diag6):
        report = local.series_convergence(diag6, [40, 10, 20])
        assert report["ladder"] == [10, 20, 40]
        assert [row["R"] for row in report["rows"]] == [10, 20, 40]
        assert report["rows"][0]["partial"] == pytest.approx(singular_series(diag6, 10).value)

    def test_cauchy_follows_fitted_decay(self, diag6, monkeypatch):
        # (40, 80] の項だけ膨らませて区間和を非単調にする
        def term(F, q, mode=local.AUTO):
            if q == 1:
                return 1.0
            return q ** -3.0 * (5.0 if 40 < q <= 80 else 1.0)

        monkeypatch.setattr(local, "singular_series_term", term)
        report = local.series_convergence(diag6, [10, 20, 40, 80])
        differences = [row["dyadic_difference"] for row in report["rows"]]
        assert differences[2] > differences[1]
        assert report["monotone"] is False
        assert report["psi_hat"] > 0
        assert report["cauchy"] is True
        assert report["passed"]

    def test_growing_tail_is_not_cauchy(self, diag6, monkeypatch):
        monkeypatch.setattr(local, "singular_series_term", lambda F, q, mode=local.AUTO: 1.0 / math.sqrt(q))
        report = local.series_convergence(diag6, [10, 20, 40])
        assert report["psi_hat"] < 0
        assert report["cauchy"] is False
        assert not report["passed"]

    def test_thirty_variable_demo_form_converges(self):
        F = demo_form("diag30")
        assert F.n_vars == 30
        report = local.series_convergence(F, [25, 50, 100])
        assert report["psi_hat"] > 0
        assert report["cauchy"]


class TestSingularIntegral:
    def test_empty_range(self, diag6, centered_weight):
        result = singular_integral(diag6, centered_weight(6), 0)
        assert result.value == 0.0
        assert result.method == "empty"

    def test_dimension_mismatch(self, diag6, centered_weight):
        with pytest.raises(PolynomialError):
            singular_integral(diag6, centered_weight(5), 10)

    def test_separable_matches_tensor(self, centered_weight):
        W = centered_weight(2)
        F = IntPolynomial.diagonal([1, -1], 4)
        separable = local._separable_integral([1, -1], 4, W, 5.0, 1e-8)
        tensor = local._generic_integral(F, W, 5.0, 1e-8)
        assert separable == pytest.approx(tensor, rel=1e-4)

    def test_method_selection(self, centered_weight):
        W = centered_weight(2)
        assert singular_integral(IntPolynomial.diagonal([1, -1], 4), W, 3).method == "separable"
        mixed = IntPolynomial.diagonal([1, -1], 4) + IntPolynomial(2, {(3, 1): 1})
        assert singular_integral(mixed, W, 3).method == "tensor"

    def test_nonconvergence_is_reported(self, centered_weight):
        with pytest.raises(QuadratureError):
            local._separable_integral([1, -1], 4, centered_weight(2), 3.0, 0.0)

    def test_relative_tolerance_for_small_integrals(self, monkeypatch, centered_weight):
        # 値が 1 より十分小さくても許容誤差は値に対する相対誤差
        seen = []
        original = local.converged

        def spy(current, previous, tol, mass=0.0):
            seen.append((current, previous))
            return original(current, previous, tol, mass)

        monkeypatch.setattr(local, "converged", spy)
        W = centered_weight(2)
        value = local._separable_integral([1, -1], 4, W, 0.01, 1e-6)
        assert 0 < value < 0.1
        current, previous = seen[-1]
        assert abs(current - previous) < 1e-6 * abs(current)

    def test_retry_with_looser_tolerance(self, monkeypatch, centered_weight):
        requested = []

        def flaky(coeffs, degree, W, R, tol):
            requested.append(tol)
            if tol < 1e-5:
                raise QuadratureError("separable singular integral did not converge")
            return 0.25

        monkeypatch.setattr(local, "_separable_integral", flaky)
        result = singular_integral(IntPolynomial.diagonal([1, -1], 4), centered_weight(2), 3, tol=1e-8)
        assert result.value == 0.25
        assert result.method == "separable-retry"
        assert requested == [1e-8, 1e-4]

    def test_retry_tolerance_comes_from_config(self, monkeypatch, centered_weight, tmp_path):
        config = tmp_path / "user.json"
        config.write_text('{"tolerances": {"quadrature_retry": 0.001}}')
        activate_config(load_config(config))
        requested = []

        def flaky(coeffs, degree, W, R, tol):
            requested.append(tol)
            if tol < 1e-4:
                raise QuadratureError("separable singular integral did not converge")
            return 0.5

        monkeypatch.setattr(local, "_separable_integral", flaky)
        assert singular_integral(IntPolynomial.diagonal([1, -1], 4), centered_weight(2), 3).value == 0.5
        assert requested == [1e-6, 1e-3]

    def test_retry_failure_is_raised(self, monkeypatch, centered_weight):
        def diverging(coeffs, degree, W, R, tol):
            raise QuadratureError("separable singular integral did not converge")

        monkeypatch.setattr(local, "_separable_integral", diverging)
        with pytest.raises(QuadratureError):
            singular_integral(IntPolynomial.diagonal([1, -1], 4), centered_weight(2), 3)

    def test_generic_dimension_limit(self, centered_weight):
        F = IntPolynomial.diagonal([1, 1, 1, -1], 4) + IntPolynomial(4, {(1, 1, 1, 1): 1})
        with pytest.raises(ArithmeticPreconditionError):
            singular_integral(F, centered_weight(4), 2)


class TestDensityWeights:
    def test_d_weight(self):
        assert D_weight(12, {2: 0, 3: -1}) == pytest.approx(2.0)
        assert D_weight(1, {}) == 1.0
        assert D_weight(5, {5: 1}) == pytest.approx(5.0)

    def test_d_weight_missing_prime(self):
        with pytest.raises(ArithmeticPreconditionError):
            D_weight(15, {3: 0})

    def test_single_range_counts_squarefree(self):
        report = lemma20_check([10])
        assert report["count"] == 6
        assert report["ratio"] == pytest.approx(0.6)

    def test_two_ranges(self):
        report = lemma20_check([4, 4])
        assert report["sizes"] == [3, 1]
        assert report["count"] == 2
        assert report["coprime_exact"]
        assert report["ratio"] == pytest.approx(0.25)

    def test_range_limits(self):
        with pytest.raises(ArithmeticPreconditionError):
            lemma20_check([2] * 6)
        with pytest.raises(GuardError):
            lemma20_check([10 ** 6])


class TestMainTerm:
    def test_product_of_local_factors(self, diag6, centered_weight):
        value = main_term(diag6, centered_weight(6), 10, 0, 0,
                          series=SingularSeriesPartial(10, 2.0), integral=SingularIntegralPartial(1.0, 3.0))
        assert value == pytest.approx(600.0)
