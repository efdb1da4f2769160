#!/usr/bin/env python3
"""
Circle Method Toolkit - 統一例外クラス
多項式・重み関数・列挙ガード・設定・検証失敗の例外定義
"""

from enum import Enum
from typing import Any, Dict, Optional


class ErrorCode(Enum):
    """エラーコード定義"""
    # 多項式関連エラー
    DIMENSION_MISMATCH = "PL001"
    ZERO_POLYNOMIAL = "PL002"
    INVALID_POLYNOMIAL = "PL003"
    UNIVARIATE_REQUIRED = "PL004"

    # 重み関数・数値積分関連エラー
    INVALID_WEIGHT = "WT001"
    ORDER_TOO_LARGE = "WT002"
    QUADRATURE_DIVERGED = "WT003"

    # 列挙ガード
    ENUMERATION_GUARD = "EG001"
    MODULUS_GUARD = "EG002"

    # 算術前提条件
    NOT_COPRIME = "AR001"
    INVALID_ARGUMENT = "AR002"
    INSUFFICIENT_DATA = "AR003"

    # 設定関連エラー
    INVALID_CONFIG = "CF001"
    MISSING_CONFIG_KEY = "CF002"
    MALFORMED_JSON = "CF003"

    # 検証失敗
    CHECK_FAILED = "CK001"

    # システム関連エラー
    PERMISSION_ERROR = "SY001"


class CircleToolkitError(Exception):
    """Circle Method Toolkit 統一エラー基底クラス"""

    def __init__(
        self,
        message: str,
        error_code: Optional[ErrorCode] = None,
        details: Optional[Dict[str, Any]] = None,
        suggestions: Optional[str] = None
    ):
        """
        初期化

        Args:
            message: エラーメッセージ
            error_code: エラーコード
            details: エラー詳細情報
            suggestions: 解決提案
        """
        super().__init__(message)
        self.message = message
        self.error_code = error_code or ErrorCode.INVALID_ARGUMENT
        self.details = details or {}
        self.suggestions = suggestions
        error_stats.record_error(self)

    def __str__(self):
        base_msg = f"[{self.error_code.value}] {self.message}"
        if self.suggestions:
            base_msg += f"\n💡 解決提案: {self.suggestions}"
        return base_msg

    def to_dict(self) -> Dict[str, Any]:
        """辞書形式でエラー情報を返却（レポート埋め込み用）"""
        return {
            "error_code": self.error_code.value,
            "message": self.message,
            "details": self.details,
            "suggestions": self.suggestions,
            "error_type": self.__class__.__name__
        }


class PolynomialError(CircleToolkitError):
    """多項式関連エラー"""

    def __init__(self, message: str, **kwargs):
        if "error_code" not in kwargs:
            lowered = message.lower()
            if "dimension" in lowered or "length" in lowered:
                kwargs["error_code"] = ErrorCode.DIMENSION_MISMATCH
                kwargs.setdefault("suggestions", "シフトベクトルの長さを変数の数に合わせてください")
            elif "zero" in lowered:
                kwargs["error_code"] = ErrorCode.ZERO_POLYNOMIAL
            elif "univariate" in lowered:
                kwargs["error_code"] = ErrorCode.UNIVARIATE_REQUIRED
            else:
                kwargs["error_code"] = ErrorCode.INVALID_POLYNOMIAL
                kwargs.setdefault("suggestions", '多項式JSONの形式 {"n": int, "terms": [{"e": [...], "c": "..."}]} を確認してください')
        super().__init__(message, **kwargs)


class WeightError(CircleToolkitError):
    """重み関数関連エラー"""

    def __init__(self, message: str, **kwargs):
        if "error_code" not in kwargs:
            if "order" in message.lower():
                kwargs["error_code"] = ErrorCode.ORDER_TOO_LARGE
                kwargs.setdefault("suggestions", "weights.max_order の設定値以下の階数を指定してください")
            else:
                kwargs["error_code"] = ErrorCode.INVALID_WEIGHT
        super().__init__(message, **kwargs)


class QuadratureError(WeightError):
    """数値積分の収束失敗"""

    def __init__(self, message: str, **kwargs):
        kwargs.setdefault("error_code", ErrorCode.QUADRATURE_DIVERGED)
        kwargs.setdefault("suggestions", "初期刻み幅を小さくするか、細分化の上限を引き上げてください")
        super().__init__(message, **kwargs)


class GuardError(CircleToolkitError):
    """列挙ガード超過（暗黙の打ち切りは行わない）"""

    def __init__(self, message: str, size: Optional[int] = None, limit: Optional[int] = None, **kwargs):
        details = kwargs.setdefault("details", {})
        if size is not None:
            details["size"] = size
        if limit is not None:
            details["limit"] = limit
        if "error_code" not in kwargs:
            if "modulus" in message.lower():
                kwargs["error_code"] = ErrorCode.MODULUS_GUARD
            else:
                kwargs["error_code"] = ErrorCode.ENUMERATION_GUARD
        kwargs.setdefault("suggestions", "より小さいパラメータを使うか、設定の guards セクションで上限を変更してください")
        super().__init__(message, **kwargs)


class ArithmeticPreconditionError(CircleToolkitError):
    """算術的な前提条件違反"""

    def __init__(self, message: str, **kwargs):
        if "error_code" not in kwargs:
            lowered = message.lower()
            if "coprime" in lowered or "gcd" in lowered:
                kwargs["error_code"] = ErrorCode.NOT_COPRIME
            elif "insufficient" in lowered:
                kwargs["error_code"] = ErrorCode.INSUFFICIENT_DATA
            else:
                kwargs["error_code"] = ErrorCode.INVALID_ARGUMENT
        super().__init__(message, **kwargs)


class ConfigError(CircleToolkitError):
    """設定関連エラー"""

    def __init__(self, message: str, config_key: Optional[str] = None, **kwargs):
        if config_key:
            kwargs.setdefault("details", {})["config_key"] = config_key
        if "error_code" not in kwargs:
            lowered = message.lower()
            if "json" in lowered:
                kwargs["error_code"] = ErrorCode.MALFORMED_JSON
                kwargs.setdefault("suggestions", "JSONの構文を確認してください")
            elif "missing" in lowered:
                kwargs["error_code"] = ErrorCode.MISSING_CONFIG_KEY
            else:
                kwargs["error_code"] = ErrorCode.INVALID_CONFIG
                kwargs.setdefault("suggestions", "設定ファイルの形式と必須項目を確認してください")
        super().__init__(message, **kwargs)


class CheckFailure(CircleToolkitError):
    """検証（恒等式・不等式）が成り立たなかった"""

    def __init__(self, message: str, check: Optional[str] = None, **kwargs):
        if check:
            kwargs.setdefault("details", {})["check"] = check
        kwargs.setdefault("error_code", ErrorCode.CHECK_FAILED)
        super().__init__(message, **kwargs)


def raise_config_error(message: str, config_key: Optional[str] = None, **kwargs):
    """設定エラー発生"""
    raise ConfigError(message, config_key=config_key, **kwargs)


def check_guard(size: int, limit: int, what: str):
    """列挙サイズがガード以下であることを確認

    Raises:
        GuardError: size > limit の場合
    """
    if size > limit:
        raise GuardError(f"enumeration guard exceeded for {what}: {size} > {limit}", size=size, limit=limit)


def get_error_by_code(error_code: str) -> Optional[ErrorCode]:
    """エラーコードから ErrorCode を取得"""
    for code in ErrorCode:
        if code.value == error_code:
            return code
    return None


class ErrorStats:
    """エラー統計クラス"""

    def __init__(self):
        self.error_counts = {}
        self.total_errors = 0

    def record_error(self, error: CircleToolkitError):
        error_type = type(error).__name__
        self.error_counts[error_type] = self.error_counts.get(error_type, 0) + 1
        self.total_errors += 1

    def get_stats(self) -> Dict[str, Any]:
        return {
            "total_errors": self.total_errors,
            "error_breakdown": dict(self.error_counts),
            "most_common": max(self.error_counts.items(), key=lambda x: x[1]) if self.error_counts else None
        }

    def reset(self):
        self.error_counts.clear()
        self.total_errors = 0


error_stats = ErrorStats()
