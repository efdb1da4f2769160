#!/usr/bin/env python3
"""
Circle Method Toolkit - バッチ実行フロントエンド

サブコマンド:
    verify-delta       δ₀ 近似の精度検証
    expsum             完全和 T(q,v) の計算 / 乗法性検証
    singular-series    特異級数の部分和と収束の推定
    singular-integral  特異積分の数値計算
    count              射影的な点の個数・成長率・重み付き個数
    optimize           指数計算の最大最小（範囲ごと）
    accept             受け入れ検証スイート

終了コード: 0 成功 / 1 検証不成立 / 2 入力・設定エラー / 3 列挙ガード超過
"""

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy
import scipy
import sympy

import circle_method
from circle_method import bounds, count, delta, expsums, local
from circle_method.acceptance import CHECK_NAMES, AcceptanceSuite
from circle_method.poly import IntPolynomial
from circle_method.weights import WeightSpec
from common.config_loader import activate_config, load_config, parse_rational
from common.error_handler import ErrorSeverity, handle_error
from common.exceptions import (ArithmeticPreconditionError, CheckFailure, CircleToolkitError, ConfigError,
                               ErrorCode, GuardError, PolynomialError, QuadratureError, WeightError)
from common.file_utils import FileUtils
from common.logger import get_logger, log_exceptions, log_system_info, setup_logging

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_GUARD = 3


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"comma-separated integers expected: {text!r}") from e


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text, "argument")
    except ConfigError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def _guard_override(text: str) -> Dict[str, int]:
    key, _, value = text.partition("=")
    if not key or not value.isdigit():
        raise argparse.ArgumentTypeError(f"guard override must look like name=int: {text!r}")
    return {key: int(value)}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Circle Method Toolkit: quartic hypersurface verification")
    parser.add_argument("--config", help="ユーザー設定JSON（既定値に深いマージ）")
    parser.add_argument("--seed", type=int, help="乱択検証の種（既定は設定の seed）")
    parser.add_argument("--report", help="レポートJSONの出力先")
    parser.add_argument("--csv", action="store_true", help="表形式の部分をCSVにも出力")
    parser.add_argument("--guard", action="append", type=_guard_override, default=[],
                        help="列挙ガードの上書き name=int（複数可）")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-delta", help="δ₀ 近似の精度検証")
    p.add_argument("--Q", type=_rational, required=True)
    p.add_argument("--theta", type=_rational, default=Fraction(1, 2))
    p.add_argument("--nmax", type=int)
    p.add_argument("--tol", type=float, default=1e-2)

    p = sub.add_parser("expsum", help="完全和の計算と乗法性検証")
    actions = p.add_subparsers(dest="action", required=True)
    t = actions.add_parser("T", help="T(q, v) または T*(q, v)")
    t.add_argument("--q", type=int, required=True)
    t.add_argument("--f", required=True, help="f の多項式JSON")
    t.add_argument("--g", required=True, help="g の多項式JSON")
    t.add_argument("--v", type=_int_list, required=True)
    t.add_argument("--star", type=int, metavar="A", help="T*(q, v) を a = A で計算")
    m = actions.add_parser("check-mult", help="乗法性の乱択検証")
    m.add_argument("--trials", type=int, default=200)
    m.add_argument("--q-max", type=int, default=10_000)

    p = sub.add_parser("singular-series", help="特異級数の部分和")
    _add_form_arguments(p)
    p.add_argument("--R", type=int, default=200)
    p.add_argument("--mode", choices=[local.AUTO, local.GENERIC, local.DIAGONAL_FAST], default=local.AUTO)
    p.add_argument("--ladder", type=_int_list)

    p = sub.add_parser("singular-integral", help="特異積分")
    _add_form_arguments(p)
    _add_weight_arguments(p)
    p.add_argument("--R", type=float, default=50.0)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("count", help="射影的な点の個数")
    _add_form_arguments(p)
    _add_weight_arguments(p)
    p.add_argument("--P", type=int, required=True)
    p.add_argument("--method", choices=[count.AUTO, count.DIRECT, count.MEET_IN_MIDDLE], default=count.AUTO)
    p.add_argument("--ladder", type=_int_list, help="成長率の推定に使う P の列")
    p.add_argument("--smoothed", action="store_true", help="重み付き個数 N_W(F, P) も計算")
    p.add_argument("--nontrivial", action="store_true",
                   help="成長率と重み付き個数を自明な解を除いて計算（偶数次の対角形）")

    p = sub.add_parser("optimize", help="指数計算の最大最小")
    p.add_argument("--case", choices=bounds.OPTIMIZE_CASES, required=True)
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--phi", type=_rational, default=Fraction(0))
    p.add_argument("--scan", type=int, metavar="DENOMINATOR", help="Ω 全体の格子走査も行う")

    p = sub.add_parser("accept", help="受け入れ検証スイート")
    p.add_argument("--only", type=lambda s: [x for x in s.split(",") if x], help=f"実行する項目 {CHECK_NAMES}")
    p.add_argument("--quick", action="store_true", help="重い検証の規模を縮める")
    p.add_argument("--fail-fast", action="store_true", help="最初の不成立で中断（CheckFailure）")
    return parser


def _add_form_arguments(parser: argparse.ArgumentParser):
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--form", help="多項式JSON")
    group.add_argument("--demo", help="設定の demo.forms の名前")


def _add_weight_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--weight", help="重みJSON（既定: 各座標 1/2 を中心とする γ 積）")
    parser.add_argument("--x0", type=lambda s: [_rational(x) for x in s.split(",")], help="重みの中心 p/q,...")


class CircleToolkitRunner:
    """
    サブコマンドの実行器

    設定の読み込みと有効化、各モジュールの呼び出し、レポートの保存、終了コードの決定を行う。
    """

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.logger = get_logger("CircleToolkitRunner")
        self.file_utils = FileUtils()
        self.config: Dict[str, Any] = {}
        self.seed = 0

    # ---- 入力 ----

    def load_configuration(self):
        overrides: Dict[str, Any] = {}
        guards: Dict[str, int] = {}
        for item in self.args.guard:
            guards.update(item)
        if guards:
            overrides["guards"] = guards
        self.config = load_config(self.args.config, overrides)
        self.seed = self.config["seed"] if self.args.seed is None else self.args.seed
        activate_config(self.config)

    def _read_json(self, path: str) -> Any:
        try:
            data = self.file_utils.load_json(path)
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise ConfigError(f"malformed JSON in {path}: {e}", config_key=path) from e
        if data is None:
            raise ConfigError(f"input file missing: {path}", config_key=path)
        return data

    def load_polynomial(self, path: str) -> IntPolynomial:
        return IntPolynomial.from_json(self._read_json(path))

    def load_form(self) -> IntPolynomial:
        if self.args.form:
            return self.load_polynomial(self.args.form)
        forms = self.config["demo"]["forms"]
        if self.args.demo not in forms:
            raise ConfigError(f"unknown demo form: {self.args.demo} (available: {sorted(forms)})",
                              config_key="demo.forms")
        return IntPolynomial.from_json(forms[self.args.demo])

    def load_weight(self, n: int) -> WeightSpec:
        if self.args.weight:
            W = WeightSpec.from_json(self._read_json(self.args.weight))
        else:
            x0 = self.args.x0 or [Fraction(1, 2)] * n
            settings = self.config["weights"]
            W = WeightSpec.gamma_product(x0, parse_rational(settings["rho"], "weights.rho"), settings["profile"])
        if W.n_vars != n:
            raise WeightError(f"weight has {W.n_vars} variables but the form has {n}")
        return W

    # ---- サブコマンド ----

    def cmd_verify_delta(self) -> Dict[str, Any]:
        report = delta.verify_delta(float(self.args.Q), float(self.args.theta), self.args.nmax)
        report["tolerance"] = self.args.tol
        report["passed"] = report["max_error"] <= self.args.tol
        return report

    def cmd_expsum(self) -> Dict[str, Any]:
        if self.args.action == "check-mult":
            return expsums.multiplicativity_suite(self.args.trials, self.seed, self.args.q_max)
        f, g = self.load_polynomial(self.args.f), self.load_polynomial(self.args.g)
        q, v = self.args.q, self.args.v
        if self.args.star is not None:
            value = expsums.T_star(q, self.args.star, g, v)
            return {"sum": "T_star", "q": q, "a": self.args.star, "v": v, "value": value, "abs": abs(value)}
        value = expsums.T_complete(q, f, g, v)
        return {"sum": "T", "q": q, "v": v, "value": value, "abs": abs(value)}

    def cmd_singular_series(self) -> Dict[str, Any]:
        F = self.load_form()
        report: Dict[str, Any] = {"series": local.singular_series(F, self.args.R, self.args.mode).to_dict()}
        if self.args.ladder:
            convergence = local.series_convergence(F, self.args.ladder)
            report["convergence"] = convergence
            report["passed"] = convergence["passed"]
        return report

    def cmd_singular_integral(self) -> Dict[str, Any]:
        F = self.load_form()
        W = self.load_weight(F.n_vars)
        result = local.singular_integral(F, W, self.args.R, self.args.tol)
        return {"weight": W.to_json(), **result.to_dict()}

    def cmd_count(self) -> Dict[str, Any]:
        F = self.load_form()
        report: Dict[str, Any] = {"projective": count.count_projective(F, self.args.P, self.args.method).to_dict()}
        if self.args.ladder:
            report["growth"] = count.growth_fit(F, self.args.ladder, self.args.method, show_progress=True,
                                                exclude_trivial=self.args.nontrivial)
        if self.args.smoothed:
            W = self.load_weight(F.n_vars)
            report["smoothed"] = {"weight": W.to_json(), "P": self.args.P,
                                  "value": count.count_smoothed(F, W, self.args.P)}
            if self.args.nontrivial:
                report["smoothed"]["nontrivial"] = count.count_smoothed(F, W, self.args.P, exclude_trivial=True)
        return report

    def cmd_optimize(self) -> Dict[str, Any]:
        report = bounds.optimize(self.args.case, self.args.n, self.args.phi)
        if self.args.scan:
            scan = bounds.minor_arc_scan(self.args.n, self.args.scan, self.args.phi)
            report["scan"] = scan
            report["passed"] = report["passed"] and scan["all_negative"]
        return report

    def cmd_accept(self) -> Dict[str, Any]:
        return AcceptanceSuite(self.seed, self.args.quick, self.args.fail_fast).run(self.args.only)

    # ---- レポート ----

    def versions(self) -> Dict[str, str]:
        return {"circle_method": circle_method.__version__, "numpy": numpy.__version__,
                "scipy": scipy.__version__, "sympy": sympy.__version__}

    def report_path(self) -> Path:
        if self.args.report:
            return Path(self.args.report)
        return Path(self.config["reports"]["directory"]) / f"{self.args.command}.json"

    @log_exceptions
    def write_report(self, result: Dict[str, Any], passed: bool) -> Path:
        report = {
            "command": self.args.command,
            "arguments": {k: v for k, v in vars(self.args).items()
                          if k not in ("config", "report", "log_level", "csv")},
            "config_hash": self.file_utils.config_hash(self.config),
            "versions": self.versions(),
            "seed": self.seed,
            "passed": passed,
            "result": result,
        }
        path = self.report_path()
        if not self.file_utils.save_json(report, path):
            raise ConfigError(f"cannot write report: {path}", config_key="reports.directory",
                              error_code=ErrorCode.PERMISSION_ERROR)
        if self.args.csv or self.config["reports"].get("csv"):
            rows = result.get("rows")
            if isinstance(rows, list) and rows and isinstance(rows[0], dict):
                self.file_utils.save_csv(rows, path.with_suffix(".csv"))
        return path

    def run(self) -> int:
        """
        サブコマンドを実行して終了コードを返す

        Returns:
            0 成功 / 1 検証不成立 / 2 入力・設定エラー / 3 ガード超過
        """
        handler = getattr(self, "cmd_" + self.args.command.replace("-", "_"))
        try:
            self.load_configuration()
            if self.args.log_level == "DEBUG":
                log_system_info()
            self.logger.start_operation(f"{self.args.command} (seed={self.seed})")
            result = handler()
            passed = bool(result.get("passed", True))
            path = self.write_report(result, passed)
        except GuardError as e:
            self.logger.error(f"列挙ガード超過: {e}")
            return EXIT_GUARD
        except (QuadratureError, CheckFailure) as e:
            self.logger.error(f"検証不成立: {e}")
            return EXIT_CHECK_FAILED
        except (ConfigError, PolynomialError, WeightError, ArithmeticPreconditionError) as e:
            self.logger.error(f"入力エラー: {e}")
            return EXIT_INPUT_ERROR
        finally:
            activate_config(None)

        self.logger.complete_operation(self.args.command)
        if passed:
            self.logger.success(f"レポート保存: {path}")
            return EXIT_OK
        self.logger.warning(f"検証不成立（レポート: {path}）")
        return EXIT_CHECK_FAILED


def main(argv: Optional[Sequence[str]] = None) -> int:
    """メイン実行関数"""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    return CircleToolkitRunner(args).run()


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n👋 中断しました")
        sys.exit(130)
    except CircleToolkitError as e:
        handle_error(e, severity=ErrorSeverity.CRITICAL, reraise=False)
        sys.exit(EXIT_CHECK_FAILED)
