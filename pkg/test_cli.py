#!/usr/bin/env python3
"""
コマンドラインのテスト（終了コードとレポートの形）
"""

import json

import pytest

from circle_main import EXIT_CHECK_FAILED, EXIT_GUARD, EXIT_INPUT_ERROR, EXIT_OK, main
from circle_method import expsums
from circle_method.acceptance import AcceptanceSuite
from circle_method.poly import IntPolynomial


def run(tmp_path, *argv, name="report.json"):
    report = tmp_path / name
    code = main(["--log-level", "WARNING", "--report", str(report), *argv])
    return code, report


def write_form(tmp_path, name, F):
    path = tmp_path / name
    path.write_text(json.dumps(F.to_json()))
    return str(path)


class TestOptimize:
    def test_appendix_report(self, tmp_path):
        code, report = run(tmp_path, "optimize", "--case", "appendix", "--n", "30")
        assert code == EXIT_OK
        data = json.loads(report.read_text())
        assert data["command"] == "optimize"
        assert data["passed"] is True
        assert len(data["config_hash"]) == 64
        assert set(data["versions"]) == {"circle_method", "numpy", "scipy", "sympy"}
        assert data["seed"] == 7

    def test_reports_are_byte_identical(self, tmp_path):
        run(tmp_path, "optimize", "--case", "range3", name="a.json")
        run(tmp_path, "optimize", "--case", "range3", name="b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_seed_override_is_recorded(self, tmp_path):
        code, report = run(tmp_path, "--seed", "11", "optimize", "--case", "range2")
        assert code == EXIT_OK
        assert json.loads(report.read_text())["seed"] == 11


class TestInputErrors:
    def test_malformed_form_file(self, tmp_path):
        path = tmp_path / "form.json"
        path.write_text('{"n": 3, "terms": [')
        code, report = run(tmp_path, "count", "--form", str(path), "--P", "3")
        assert code == EXIT_INPUT_ERROR
        assert not report.exists()

    def test_missing_form_file(self, tmp_path):
        code, _ = run(tmp_path, "singular-series", "--form", str(tmp_path / "absent.json"))
        assert code == EXIT_INPUT_ERROR

    def test_unknown_demo(self, tmp_path):
        code, _ = run(tmp_path, "singular-series", "--demo", "diag99")
        assert code == EXIT_INPUT_ERROR

    def test_unknown_acceptance_check(self, tmp_path):
        code, _ = run(tmp_path, "accept", "--only", "bogus")
        assert code == EXIT_INPUT_ERROR

    def test_bad_guard_syntax(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            run(tmp_path, "--guard", "complete_sum", "optimize", "--case", "appendix")
        assert info.value.code == 2

    def test_bad_user_config(self, tmp_path):
        config = tmp_path / "user.json"
        config.write_text(json.dumps({"weights": {"rho": "2"}}))
        code, _ = run(tmp_path, "--config", str(config), "optimize", "--case", "appendix")
        assert code == EXIT_INPUT_ERROR

    def test_unwritable_report(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        code = main(["--log-level", "WARNING", "--report", str(blocker / "report.json"),
                     "optimize", "--case", "appendix"])
        assert code == EXIT_INPUT_ERROR


class TestGuards:
    def test_projective_enumeration_guard(self, tmp_path):
        F = IntPolynomial.diagonal([1] * 12, 4) + IntPolynomial(12, {(1,) * 4 + (0,) * 8: 1})
        code, report = run(tmp_path, "count", "--form", write_form(tmp_path, "f.json", F), "--P", "10")
        assert code == EXIT_GUARD
        assert not report.exists()

    def test_guard_override_from_command_line(self, tmp_path):
        f = write_form(tmp_path, "f.json", IntPolynomial.diagonal([1, 2], 4))
        g = write_form(tmp_path, "g.json", IntPolynomial.diagonal([1, -1], 3))
        code, _ = run(tmp_path, "--guard", "complete_sum=10", "expsum", "T", "--q", "5", "--f", f, "--g", g,
                      "--v", "1,2")
        assert code == EXIT_GUARD


class TestCommands:
    def test_complete_sum(self, tmp_path):
        F, G = IntPolynomial.diagonal([1, 2], 4), IntPolynomial.diagonal([1, -1], 3)
        f, g = write_form(tmp_path, "f.json", F), write_form(tmp_path, "g.json", G)
        code, report = run(tmp_path, "expsum", "T", "--q", "5", "--f", f, "--g", g, "--v", "1,2")
        assert code == EXIT_OK
        result = json.loads(report.read_text())["result"]
        expected = expsums.T_complete(5, F, G, [1, 2])
        assert result["value"]["re"] == pytest.approx(expected.real, abs=1e-9)
        assert result["value"]["im"] == pytest.approx(expected.imag, abs=1e-9)

    def test_verify_delta_with_csv(self, tmp_path):
        code, report = run(tmp_path, "--csv", "verify-delta", "--Q", "5", "--theta", "9/10", "--tol", "0.02")
        assert code == EXIT_OK
        header = report.with_suffix(".csv").read_text().splitlines()[0]
        assert header == "n,value,error"

    def test_count_demo_form(self, tmp_path):
        code, report = run(tmp_path, "count", "--demo", "diag3", "--P", "4", "--method", "direct")
        assert code == EXIT_OK
        assert json.loads(report.read_text())["result"]["projective"]["method"] == "direct"

    def test_quick_acceptance(self, tmp_path):
        code, report = run(tmp_path, "accept", "--only", "golden,optimization", "--quick")
        assert code == EXIT_OK
        names = [check["name"] for check in json.loads(report.read_text())["result"]["checks"]]
        assert names == ["golden", "optimization"]

    def test_failed_check_exit_code(self, tmp_path):
        code, report = run(tmp_path, "verify-delta", "--Q", "5", "--tol", "0")
        assert code == EXIT_CHECK_FAILED
        assert json.loads(report.read_text())["passed"] is False

    def test_fail_fast_maps_to_check_exit(self, tmp_path, monkeypatch):
        monkeypatch.setattr(AcceptanceSuite, "check_golden", lambda self: {"passed": False})
        code, report = run(tmp_path, "accept", "--only", "golden,optimization", "--fail-fast")
        assert code == EXIT_CHECK_FAILED
        assert not report.exists()

    def test_count_without_trivial_solutions(self, tmp_path):
        # x² + y² = z² の自明な解は (1:0:±1), (0:1:±1) の4点
        F = IntPolynomial.diagonal([1, 1, -1], 2)
        code, report = run(tmp_path, "count", "--form", write_form(tmp_path, "f.json", F), "--P", "10",
                           "--ladder", "10,15,20,30", "--nontrivial", "--method", "direct")
        assert code == EXIT_OK
        result = json.loads(report.read_text())["result"]
        assert result["projective"]["trivial"] == 4
        assert result["projective"]["nontrivial"] == 8
        assert result["growth"]["exclude_trivial"] is True
        assert result["growth"]["slope"] > result["growth"]["total_slope"]
