#!/usr/bin/env python3
"""
指数計算のテスト（全て厳密な有理数で比較）
"""

from fractions import Fraction as Fr

import pytest

from circle_method import bounds
from circle_method.bounds import (B2_FORM, B3_FORM, AffineExponentForm, MinorArcScanner, Polygon, condition_check,
                                  family, maxmin, omega_region, optimize, scan_cell)
from common.exceptions import ArithmeticPreconditionError, ConfigError

GOLDEN_N30 = {
    ("h2", 0): (Fr(-145, 186), Fr(-1687, 372), Fr(209, 310)),
    ("w2", None): (Fr(889, 372), Fr(239, 372), Fr(-1759, 620)),
    ("h1", 0): (Fr(-115, 78), Fr(-15329, 4524), Fr(5943, 3770)),
    ("h1", 28): (Fr(-23, 234), Fr(101, 13572), Fr(133, 11310)),
    ("w1", None): (Fr(49, 39), Fr(98, 39), Fr(-71, 52)),
    ("h3", 0): (Fr(-145, 186), Fr(-49403, 10788), Fr(6141, 8990)),
    ("h3", 28): (Fr(-29, 558), Fr(-2329, 32364), Fr(-1289, 26970)),
    ("w3", None): (Fr(889, 372), Fr(53, 93), Fr(-175, 62)),
}


class TestAffineForms:
    def test_block_exponents(self):
        assert B2_FORM.as_tuple() == (Fr(1, 3), Fr(2, 3), 0)
        assert B3_FORM.as_tuple() == (Fr(1, 3), Fr(1, 6), 0)

    def test_arithmetic(self):
        f = AffineExponentForm(1, 2, 3)
        assert (2 * f - 1).as_tuple() == (2, 4, 5)
        assert (1 - f).as_tuple() == (-1, -2, -2)
        assert (f / 2)((Fr(2), Fr(1))) == Fr(7, 2)

    def test_floats_rejected(self):
        with pytest.raises(ArithmeticPreconditionError):
            AffineExponentForm(0.5)
        with pytest.raises(ArithmeticPreconditionError):
            AffineExponentForm.Z() * 0.25

    def test_string_coefficients(self):
        assert AffineExponentForm("1/3", "-2", 0).as_tuple() == (Fr(1, 3), -2, 0)


class TestPolygon:
    def test_omega(self):
        omega = omega_region()
        assert omega.contains((Fr(1), Fr(1, 2)))
        assert not omega.contains((Fr(1, 2), Fr(1)))
        assert len(omega.edges()) == 3

    def test_orientation_checked(self):
        with pytest.raises(ArithmeticPreconditionError):
            Polygon(((0, 0), (0, 1), (1, 0)))

    def test_empty(self):
        with pytest.raises(ArithmeticPreconditionError):
            Polygon(())

    def test_clip(self):
        clipped = omega_region().clip(AffineExponentForm.Z() - 1)
        assert clipped.contains((Fr(8, 5), Fr(1, 2)))
        assert not clipped.contains((Fr(1, 2), Fr(0)))
        assert omega_region().clip(AffineExponentForm.constant(-1)) is None

    def test_degenerate_segment(self):
        segment = Polygon(((0, 0), (1, 1)))
        assert segment.contains((Fr(1, 2), Fr(1, 2)))
        assert not segment.contains((Fr(1, 2), Fr(0)))


class TestFamilies:
    @pytest.mark.parametrize("key", list(GOLDEN_N30))
    def test_golden_coefficients(self, key):
        name, eta = key
        assert family(name, 30, eta).as_tuple() == GOLDEN_N30[key]

    def test_w_forms_follow_t_upper_bounds(self):
        assert all(bounds.weyl_consistency(30).values())
        assert all(bounds.weyl_consistency(37).values())

    @pytest.mark.parametrize("name, n, eta", [("h4", 30, 0), ("h1", 24, 0), ("h2", 30, 5), ("w1", 30, 28)])
    def test_invalid_arguments(self, name, n, eta):
        with pytest.raises(ArithmeticPreconditionError):
            family(name, n, eta)

    @pytest.mark.parametrize("name", ["h1", "h2", "h3"])
    @pytest.mark.parametrize("top", [False, True])
    def test_nonincreasing_in_n_away_from_origin(self, name, top):
        grid = [p for p in MinorArcScanner(30).grid(16) if p[0] >= Fr(1, 2)]
        for n in range(30, 40):
            current = family(name, n, n - 2 if top else 0)
            following = family(name, n + 1, n - 1 if top else 0)
            assert all(following(p) <= current(p) for p in grid), (name, n)

    def test_origin_breaks_monotonicity(self):
        origin = (Fr(0), Fr(0))
        assert family("h2", 31)(origin) > family("h2", 30)(origin)


class TestMaxMin:
    def test_tie_breaks_lexicographically(self):
        result = maxmin([AffineExponentForm.Z(), 1 - AffineExponentForm.Z()])
        assert result.value == Fr(1, 2)
        assert result.point == (Fr(1, 2), Fr(0))

    def test_needs_forms(self):
        with pytest.raises(ArithmeticPreconditionError):
            maxmin([])

    def test_appendix_value(self):
        result = maxmin([family("h2", 30), family("w2", 30)])
        assert result.value < Fr(-1, 10)

    def test_range2_values(self):
        assert maxmin([family("h1", 30, 0), family("w1", 30)]).value <= Fr(-1, 100)
        assert maxmin([family("h1", 30, 28), family("w1", 30)]).value <= Fr(-1, 50)

    def test_range3_values(self):
        assert bounds.range3_check(30) <= Fr(-1, 125)
        top = bounds.form_maximum(family("h3", 30, 28))
        assert top.value == Fr(-1289, 26970)
        assert top.point == (0, 0)

    @pytest.mark.parametrize("case", ["appendix", "range1", "range2", "range3"])
    def test_optimize_cases_pass(self, case):
        report = optimize(case, 30)
        assert report["passed"]
        assert all("value" in entry for entry in report["entries"])

    def test_range4_report(self):
        labels = [entry["label"] for entry in optimize("range4", 30)["entries"]]
        assert labels == ["range4_eta0", "range4_eta_top"]

    def test_unknown_case(self):
        with pytest.raises(ArithmeticPreconditionError):
            optimize("range5")


class TestConditions:
    def test_thresholds(self):
        assert bounds.vw1_threshold(30) == Fr(61, 90)
        assert bounds.vw2_pair(30) == (Fr(16, 13), Fr(-31, 13))
        assert bounds.t_max(Fr(1, 5)) == Fr(-17, 10)

    def test_vw1(self):
        result = condition_check("vw1", {"n": 30, "b2": "1/2"})
        assert result.satisfied
        assert result.margin == Fr(8, 45)

    def test_vw2_boundary_is_satisfied(self):
        result = condition_check("vw2", {"n": 30, "b2": 0, "t": "-31/13"})
        assert result.satisfied
        assert result.margin == 0

    def test_weyl_caps_at_minus_two(self):
        result = condition_check("weyl", {"n": 30, "b2": 2, "t": -2})
        assert result.threshold == -2
        assert result.satisfied

    def test_missing_parameter(self):
        with pytest.raises(ConfigError) as info:
            condition_check("vw3", {"n": 30, "b2": 0, "t": -3})
        assert info.value.details["config_key"] == "Z"

    def test_malformed_and_unknown(self):
        with pytest.raises(ConfigError):
            condition_check("vw1", {"n": 30, "b2": "abc"})
        with pytest.raises(ConfigError):
            condition_check("vw9", {"n": 30})


class TestHChoice:
    def test_critical_point_values(self):
        point = (Fr(8, 5), Fr(8, 5))
        tau = bounds.critical_point()["tau"]
        assert bounds.H_choice("H1", 30, tau)(point) == Fr(28, 145)
        assert bounds.H_choice("H2", 30)(point) == Fr(6, 31)

    def test_invalid_regime(self):
        with pytest.raises(ArithmeticPreconditionError):
            bounds.H_choice("H3", 30)

    def test_weyl_exponents(self):
        assert bounds.weyl_exponent("quartic", 30, 0, 0) == 30
        assert bounds.weyl_exponent("birch", 32, 1, 0) == 36
        with pytest.raises(ArithmeticPreconditionError):
            bounds.weyl_exponent("vinogradov", 30, 0, 0)

    def test_k_exponent(self):
        assert bounds.k_exponent(30, Fr(-8, 5))((Fr(0), Fr(0))) == Fr(132, 5)


class TestMinorArcScan:
    def test_corner_cell(self):
        cell = scan_cell(30, Fr(8, 5), Fr(8, 5))
        assert cell.terms["Y0"] == Fr(-3, 31)
        assert cell.terms["Yn2"] == Fr(-1, 155)
        assert "range4" in cell.ranges
        assert cell.margin < 0

    def test_origin_cell(self):
        assert scan_cell(30, 0, 0).terms["Yn1"] == Fr(-7, 870)

    def test_n30_is_negative_everywhere(self):
        report = bounds.minor_arc_scan(30, 8)
        assert report["cells"] == 45
        assert report["all_negative"]

    @pytest.mark.slow
    def test_n30_fine_grid(self):
        assert bounds.minor_arc_scan(30, 32)["all_negative"]

    def test_n29_corner_has_zero_margin(self):
        assert scan_cell(29, Fr(8, 5), Fr(8, 5)).margin == 0
        assert not bounds.minor_arc_scan(29, 8)["all_negative"]

    def test_scanner_range(self):
        with pytest.raises(ArithmeticPreconditionError):
            MinorArcScanner(28)
        with pytest.raises(ArithmeticPreconditionError):
            MinorArcScanner(30).grid(0)
        assert len(MinorArcScanner(30).grid(2)) == 6
