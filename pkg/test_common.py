#!/usr/bin/env python3
"""
共通モジュール（設定・例外・ファイル・エラーハンドラー）のテスト
"""

import json
from fractions import Fraction

import numpy as np
import pytest

from common.config_loader import activate_config, default_config, get_guard, load_config, parse_rational
from common.error_handler import ErrorHandler, ErrorSeverity, error_handler
from common.exceptions import (ArithmeticPreconditionError, CheckFailure, ConfigError, ErrorCode, GuardError,
                               PolynomialError, QuadratureError, WeightError, check_guard, error_stats,
                               get_error_by_code)
from common.file_utils import FileUtils, canonical_dumps
from common.logger import log_exceptions, log_execution_time


class TestConfigLoader:
    def test_packaged_defaults(self):
        config = load_config()
        assert config["guards"]["affine_enumeration"] == 10 ** 8
        assert config["weights"]["rho"] == "1/4"
        assert config["seed"] == 7

    def test_user_file_is_deep_merged(self, tmp_path):
        path = tmp_path / "user.json"
        path.write_text(json.dumps({"guards": {"complete_sum": 1000}, "delta": {"c_q": "unit"}}))
        config = load_config(path)
        assert config["guards"]["complete_sum"] == 1000
        assert config["guards"]["multiplicativity"] == 4_000_000
        assert config["delta"]["c_q"] == "unit"
        assert config["delta"]["u_flatness"] == 1

    def test_overrides_win(self, tmp_path):
        path = tmp_path / "user.json"
        path.write_text(json.dumps({"seed": 3}))
        assert load_config(path, overrides={"seed": 11})["seed"] == 11

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{guards: ")
        with pytest.raises(ConfigError) as info:
            load_config(path)
        assert info.value.error_code == ErrorCode.MALFORMED_JSON

    @pytest.mark.parametrize("override", [
        {"guards": {"complete_sum": -1}},
        {"guards": {"complete_sum": 1.5}},
        {"weights": {"rho": "3/2"}},
        {"weights": {"profile": "cosine"}},
        {"delta": {"c_q": "approximate"}},
        {"tolerances": None},
    ])
    def test_validation(self, override):
        with pytest.raises(ConfigError):
            load_config(overrides=override)

    def test_activation(self):
        custom = load_config(overrides={"guards": {"complete_sum": 5}})
        activate_config(custom)
        assert get_guard("complete_sum") == 5
        activate_config(None)
        assert get_guard("complete_sum") == 10 ** 9
        assert default_config() is default_config()

    def test_missing_guard(self):
        with pytest.raises(ConfigError):
            get_guard("no_such_guard")


class TestParseRational:
    @pytest.mark.parametrize("text, value", [("1/4", Fraction(1, 4)), ("-3", Fraction(-3)), (7, Fraction(7)),
                                             ("6/4", Fraction(3, 2))])
    def test_accepts(self, text, value):
        assert parse_rational(text) == value

    @pytest.mark.parametrize("bad", [0.25, True, "1/0", "quarter", None])
    def test_rejects(self, bad):
        with pytest.raises(ConfigError):
            parse_rational(bad, "weights.rho")


class TestExceptions:
    def test_error_codes_from_messages(self):
        assert PolynomialError("dimension mismatch").error_code == ErrorCode.DIMENSION_MISMATCH
        assert WeightError("order 9 exceeds max_order").error_code == ErrorCode.ORDER_TOO_LARGE
        assert ArithmeticPreconditionError("gcd(a, q) = 2").error_code == ErrorCode.NOT_COPRIME
        assert ArithmeticPreconditionError("insufficient data").error_code == ErrorCode.INSUFFICIENT_DATA
        assert GuardError("cube-full modulus").error_code == ErrorCode.MODULUS_GUARD

    def test_quadrature_is_weight_error(self):
        error = QuadratureError("did not converge")
        assert isinstance(error, WeightError)
        assert error.error_code == ErrorCode.QUADRATURE_DIVERGED

    def test_to_dict(self):
        data = ConfigError("bad value", config_key="weights.rho").to_dict()
        assert data["error_type"] == "ConfigError"
        assert data["details"] == {"config_key": "weights.rho"}
        assert data["error_code"] == ErrorCode.INVALID_CONFIG.value

    def test_check_failure_records_check(self):
        assert CheckFailure("identity failed", check="poisson").details["check"] == "poisson"

    def test_guard(self):
        check_guard(10, 10, "grid")
        with pytest.raises(GuardError) as info:
            check_guard(11, 10, "grid")
        assert info.value.details == {"size": 11, "limit": 10}
        assert "[EG001]" in str(info.value)

    def test_lookup_by_code(self):
        assert get_error_by_code("CK001") is ErrorCode.CHECK_FAILED
        assert get_error_by_code("ZZ999") is None

    def test_errors_are_counted(self):
        before = error_stats.get_stats()["error_breakdown"].get("WeightError", 0)
        WeightError("bad support")
        assert error_stats.get_stats()["error_breakdown"]["WeightError"] == before + 1


class TestErrorHandler:
    def test_reraises_by_default(self):
        @error_handler(severity=ErrorSeverity.LOW)
        def failing():
            raise ArithmeticPreconditionError("H must be at least 1")

        with pytest.raises(ArithmeticPreconditionError):
            failing()

    def test_swallow_when_requested(self):
        @error_handler(severity=ErrorSeverity.MEDIUM, reraise=False)
        def failing():
            raise ValueError("boom")

        assert failing() is None

    def test_passes_results_through(self):
        @error_handler()
        def ok(x):
            return x + 1

        assert ok(1) == 2

    def test_quadrature_recovers_through_fallback(self):
        handler = ErrorHandler("TestErrorHandler")
        value = handler.handle_error(QuadratureError("did not converge"), ErrorSeverity.LOW, fallback=lambda: 1.5)
        assert value == 1.5

    def test_guard_is_not_recovered(self):
        handler = ErrorHandler("TestErrorHandler")
        with pytest.raises(GuardError):
            handler.handle_error(GuardError("too many points"), ErrorSeverity.LOW, fallback=lambda: 0)

    def test_precondition_errors_are_not_recovered(self):
        handler = ErrorHandler("TestErrorHandler")
        calls = []
        with pytest.raises(ArithmeticPreconditionError):
            handler.handle_error(ArithmeticPreconditionError("moduli are not coprime"), ErrorSeverity.LOW,
                                 fallback=lambda: calls.append(1))
        assert calls == []

    def test_failed_fallback_reraises_original(self):
        handler = ErrorHandler("TestErrorHandler")
        original = QuadratureError("did not converge")

        def fallback():
            raise QuadratureError("still diverging")

        with pytest.raises(QuadratureError) as info:
            handler.handle_error(original, ErrorSeverity.LOW, fallback=fallback)
        assert info.value is original

    def test_logging_decorators_pass_through(self):
        @log_execution_time
        def timed(x):
            return 2 * x

        @log_exceptions
        def broken():
            raise PolynomialError("dimension mismatch")

        assert timed(3) == 6
        with pytest.raises(PolynomialError):
            broken()


class TestFileUtils:
    def test_canonical_json_is_order_independent(self):
        a = canonical_dumps({"b": 1, "a": Fraction(1, 3)})
        b = canonical_dumps({"a": Fraction(1, 3), "b": 1})
        assert a == b
        assert json.loads(a)["a"] == "1/3"

    def test_numpy_and_complex_values(self):
        data = json.loads(canonical_dumps({"x": np.int64(3), "y": np.array([1.5]), "z": 1 + 2j}))
        assert data == {"x": 3, "y": [1.5], "z": {"re": 1.0, "im": 2.0}}

    def test_config_hash_is_stable(self):
        utils = FileUtils()
        assert utils.config_hash({"a": 1, "b": [1, 2]}) == utils.config_hash({"b": [1, 2], "a": 1})
        assert utils.config_hash({"a": 1}) != utils.config_hash({"a": 2})

    def test_json_and_csv_round_trip(self, tmp_path):
        utils = FileUtils()
        assert utils.save_json({"value": Fraction(2, 3)}, tmp_path / "out" / "r.json")
        assert utils.load_json(tmp_path / "out" / "r.json") == {"value": "2/3"}
        assert utils.load_json(tmp_path / "missing.json", default={}) == {}
        assert utils.save_csv([{"q": 3, "value": 1.5}], tmp_path / "rows.csv")
        assert (tmp_path / "rows.csv").read_text().splitlines() == ["q,value", "3,1.5"]
        assert not utils.save_csv([], tmp_path / "empty.csv")
