#!/usr/bin/env python3
"""
Circle Method Toolkit - 統一エラーハンドリングシステム
重要度別ログ、復旧戦略、クリティカルエラーレポートを提供する
"""

import functools
import platform
import traceback
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, Optional

try:
    import psutil
    PSUTIL_AVAILABLE = True
except ImportError:
    PSUTIL_AVAILABLE = False

from .exceptions import CircleToolkitError, ErrorCode, error_stats
from .logger import get_logger


class ErrorSeverity(Enum):
    """エラー重要度"""
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


class RecoveryStrategy(Enum):
    """復旧戦略"""
    NONE = "none"
    RETRY = "retry"          # 呼び出し元が渡した fallback で再計算
    USER_INTERVENTION = "user"


class ErrorHandler:
    """統一エラーハンドリングクラス"""

    def __init__(self, logger_name: str = "ErrorHandler", enable_recovery: bool = True):
        """
        初期化

        Args:
            logger_name: ロガー名
            enable_recovery: 自動復旧機能有効フラグ
        """
        self.logger = get_logger(logger_name)
        self.enable_recovery = enable_recovery
        self.recovery_strategies = self._setup_recovery_strategies()
        self.system_info = self._collect_system_info()

    def _setup_recovery_strategies(self) -> Dict[ErrorCode, RecoveryStrategy]:
        return {
            ErrorCode.QUADRATURE_DIVERGED: RecoveryStrategy.RETRY,
            ErrorCode.ENUMERATION_GUARD: RecoveryStrategy.USER_INTERVENTION,
            ErrorCode.MODULUS_GUARD: RecoveryStrategy.USER_INTERVENTION,
            ErrorCode.INVALID_CONFIG: RecoveryStrategy.USER_INTERVENTION,
            ErrorCode.MALFORMED_JSON: RecoveryStrategy.USER_INTERVENTION,
        }

    def _collect_system_info(self) -> Dict[str, Any]:
        """システム情報収集"""
        info = {
            "platform": platform.system(),
            "machine": platform.machine(),
            "python_version": platform.python_version(),
            "timestamp": datetime.now().isoformat()
        }
        if PSUTIL_AVAILABLE:
            try:
                memory = psutil.virtual_memory()
                info["memory"] = {
                    "total_gb": memory.total / (1024**3),
                    "available_gb": memory.available / (1024**3),
                    "usage_percent": memory.percent
                }
            except Exception:
                info["memory"] = "memory info unavailable"
        else:
            info["memory"] = "psutil not available"
        return info

    def handle_error(
        self,
        error: Exception,
        severity: ErrorSeverity = ErrorSeverity.MEDIUM,
        context: Optional[Dict[str, Any]] = None,
        reraise: bool = True,
        recovery_attempt: bool = True,
        fallback: Optional[Callable[[], Any]] = None
    ) -> Optional[Any]:
        """
        統一エラー処理

        Args:
            error: 発生した例外
            severity: エラー重要度
            context: エラーコンテキスト情報
            reraise: 復旧できなかった場合に例外を再送出するか
            recovery_attempt: 復旧試行フラグ
            fallback: RETRY 戦略で呼ばれる代替計算

        Returns:
            復旧処理の結果（成功時）
        """
        context = dict(context or {})
        self._log_error(error, severity, context)

        if recovery_attempt and self.enable_recovery and fallback is not None:
            recovered = self._attempt_recovery(error, fallback)
            if recovered is not None:
                self.logger.success("エラー復旧に成功しました")
                return recovered

        self._report_error()

        if reraise:
            raise error
        return None

    def _log_error(self, error: Exception, severity: ErrorSeverity, context: Dict[str, Any]):
        """エラーログ出力"""
        log_func = {
            ErrorSeverity.LOW: self.logger.debug,
            ErrorSeverity.MEDIUM: self.logger.warning,
            ErrorSeverity.HIGH: self.logger.error,
            ErrorSeverity.CRITICAL: self.logger.critical
        }[severity]

        error_info = {
            "error_type": type(error).__name__,
            "error_message": getattr(error, "message", str(error)),
            "severity": severity.value,
            "context": context
        }
        if isinstance(error, CircleToolkitError):
            error_info["error_code"] = error.error_code.value
            error_info["details"] = error.details
        if severity in (ErrorSeverity.HIGH, ErrorSeverity.CRITICAL):
            error_info["traceback"] = traceback.format_exc()

        log_func(f"🚨 エラー発生: {error_info}")

        if severity == ErrorSeverity.CRITICAL:
            self._handle_critical_error(error, context)

    def _attempt_recovery(self, error: Exception, fallback: Callable[[], Any]) -> Optional[Any]:
        """復旧試行"""
        if not isinstance(error, CircleToolkitError):
            return None
        strategy = self.recovery_strategies.get(error.error_code, RecoveryStrategy.NONE)
        if strategy != RecoveryStrategy.RETRY:
            return None

        self.logger.info(f"🔄 復旧戦略実行: {strategy.value}")
        try:
            return fallback()
        except Exception as recovery_error:
            self.logger.error(f"復旧処理失敗: {recovery_error}")
            return None

    def _handle_critical_error(self, error: Exception, context: Dict[str, Any]):
        """クリティカルエラーレポートを logs/ に保存"""
        report_path = Path("logs") / f"critical_error_{datetime.now().strftime('%Y%m%d_%H%M%S')}.log"
        try:
            report_path.parent.mkdir(exist_ok=True)
            with open(report_path, 'w', encoding='utf-8') as f:
                f.write("Critical Error Report\n")
                f.write("=====================\n")
                f.write(f"Timestamp: {datetime.now().isoformat()}\n")
                f.write(f"Error Type: {type(error).__name__}\n")
                f.write(f"Error Message: {error}\n")
                f.write(f"System Info: {self.system_info}\n")
                f.write(f"Context: {context}\n")
                f.write(f"Traceback:\n{traceback.format_exc()}\n")
            self.logger.critical(f"エラーレポートを保存: {report_path}")
        except OSError as report_error:
            self.logger.error(f"エラーレポート保存失敗: {report_error}")

    def _report_error(self):
        stats = error_stats.get_stats()
        if stats["total_errors"] and stats["total_errors"] % 10 == 0:
            self.logger.info(f"📊 エラー統計: 総計{stats['total_errors']}件")


def error_handler(
    severity: ErrorSeverity = ErrorSeverity.MEDIUM,
    reraise: bool = True,
    context_func: Optional[Callable] = None
):
    """
    エラーハンドリングデコレータ

    例外はログ出力後に再送出される（reraise=Trueの場合）。

    Args:
        severity: エラー重要度
        reraise: 例外再投げフラグ
        context_func: 引数からコンテキストを生成する関数
    """
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs) -> Any:
            try:
                return func(*args, **kwargs)
            except Exception as e:
                context = {
                    "function": func.__name__,
                    "module": func.__module__,
                    "args_summary": str(args)[:100],
                    "kwargs_summary": str(kwargs)[:100]
                }
                if context_func:
                    try:
                        context.update(context_func(*args, **kwargs))
                    except Exception:
                        pass
                return get_error_handler().handle_error(e, severity, context, reraise, recovery_attempt=False)
        return wrapper
    return decorator


_global_error_handler = None


def get_error_handler() -> ErrorHandler:
    """グローバルエラーハンドラー取得"""
    global _global_error_handler
    if _global_error_handler is None:
        _global_error_handler = ErrorHandler("GlobalErrorHandler")
    return _global_error_handler


def handle_error(error: Exception, severity: ErrorSeverity = ErrorSeverity.MEDIUM, **kwargs):
    """エラー処理便利関数"""
    return get_error_handler().handle_error(error, severity, **kwargs)
