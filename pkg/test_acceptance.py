#!/usr/bin/env python3
"""
受け入れ検証スイートのテスト（軽い項目のみ。全体は slow）
"""

import pytest

from circle_method import count, local
from circle_method.acceptance import CHECK_NAMES, AcceptanceSuite, demo_form
from circle_method.local import SingularIntegralPartial, SingularSeriesPartial
from common.exceptions import CheckFailure, ConfigError


@pytest.fixture
def suite():
    return AcceptanceSuite(quick=True)


class TestAcceptanceSuite:
    def test_default_seed_from_config(self, suite):
        assert suite.seed == 7
        assert AcceptanceSuite(seed=3).seed == 3

    def test_every_check_is_registered(self, suite):
        assert set(suite.checks) == set(CHECK_NAMES)

    def test_golden_and_optimization(self, suite):
        report = suite.run(["golden", "optimization"])
        assert report["passed"]
        assert [c["name"] for c in report["checks"]] == ["golden", "optimization"]
        assert report["checks"][0]["checked"] == 8
        assert report["checks"][0]["mismatches"] == []

    def test_unknown_check(self, suite):
        with pytest.raises(ConfigError) as info:
            suite.run(["golden", "bogus"])
        assert info.value.details["config_key"] == "only"

    def test_failure_is_reported(self, suite):
        suite.checks["golden"] = lambda: {"passed": False}
        report = suite.run(["golden", "optimization"])
        assert not report["passed"]
        assert len(report["checks"]) == 2

    def test_fail_fast_raises(self):
        suite = AcceptanceSuite(quick=True, fail_fast=True)
        suite.checks["golden"] = lambda: {"passed": False}
        with pytest.raises(CheckFailure) as info:
            suite.run(["golden", "optimization"])
        assert info.value.details["check"] == "golden"

    def test_demo_forms(self):
        assert demo_form("diag6").diagonal_coefficients() == [1, 1, 1, -1, -1, -1]
        assert demo_form("diag3").n_vars == 3
        coeffs = demo_form("diag30").diagonal_coefficients()
        assert len(coeffs) == 30
        assert sorted(set(coeffs)) == [-2, -1, 1, 2]

    @pytest.mark.slow
    def test_full_quick_suite(self, suite):
        assert suite.run()["passed"]


class TestCountingCheck:
    def test_slope_is_fitted_without_trivial_solutions(self, suite, monkeypatch):
        calls = []

        def fake_fit(F, ladder, method=count.AUTO, show_progress=False, exclude_trivial=False):
            calls.append((F.n_vars, tuple(ladder), exclude_trivial))
            rows = [{"P": P, "count": 10 * P ** 3, "trivial": 10 * P ** 3 - P ** 2, "nontrivial": P ** 2}
                    for P in ladder]
            return {"slope": 2.0, "total_slope": 3.0, "rows": rows}

        monkeypatch.setattr(count, "growth_fit", fake_fit)
        report = suite.check_counting()
        assert calls == [(6, (10, 15, 20, 30), True)]
        assert report["passed"]
        assert report["slope_in_band"]
        assert report["total_slope"] == 3.0
        assert report["counts"][0] == {"P": 10, "total": 10000, "trivial": 9900, "nontrivial": 100}

    def test_slope_outside_band_fails(self, suite, monkeypatch):
        monkeypatch.setattr(count, "growth_fit",
                            lambda F, ladder, exclude_trivial=False, **kwargs: {"slope": 3.0, "total_slope": 3.0,
                                                                                "rows": []})
        report = suite.check_counting()
        assert all(row["direct"] == row["fast"] for row in report["overlap"])
        assert not report["slope_in_band"]
        assert not report["passed"]

    @pytest.mark.slow
    def test_real_counts_report_both_parts(self, suite):
        report = suite.check_counting()
        for row in report["counts"]:
            assert row["total"] == row["trivial"] + row["nontrivial"]
            assert row["trivial"] > row["nontrivial"]
        assert report["total_slope"] > report["growth"]["slope"]


class TestLocalGlobalCheck:
    @pytest.fixture
    def local_factors(self, monkeypatch):
        monkeypatch.setattr(local, "singular_series", lambda F, R, mode=local.AUTO: SingularSeriesPartial(R, 2.0))
        monkeypatch.setattr(local, "singular_integral",
                            lambda F, W, R, tol=None: SingularIntegralPartial(R, 1e-3))

    def test_prediction_is_compared_with_nontrivial_count(self, suite, monkeypatch, local_factors):
        # 𝔖𝔈P² = 2·10⁻³·400 = 0.8
        monkeypatch.setattr(count, "count_smoothed",
                            lambda F, W, P, exclude_trivial=False: 0.9 if exclude_trivial else 50.0)
        report = suite.check_local_global()
        assert report["P"] == 20
        assert report["predicted"] == pytest.approx(0.8)
        assert report["observed"] == 0.9
        assert report["observed_total"] == 50.0
        assert report["observed_trivial"] == pytest.approx(49.1)
        assert report["relative_error"] == pytest.approx(0.1 / 0.9)
        assert report["passed"]

    def test_disagreement_fails(self, suite, monkeypatch, local_factors):
        monkeypatch.setattr(count, "count_smoothed",
                            lambda F, W, P, exclude_trivial=False: 2.0 if exclude_trivial else 50.0)
        report = suite.check_local_global()
        assert report["relative_error"] == pytest.approx(0.6)
        assert not report["passed"]

    def test_full_size_uses_P_40(self, monkeypatch, local_factors):
        monkeypatch.setattr(count, "count_smoothed", lambda F, W, P, exclude_trivial=False: 3.2)
        report = AcceptanceSuite().check_local_global()
        assert report["P"] == 40
        assert report["predicted"] == pytest.approx(3.2)
        assert report["passed"]
