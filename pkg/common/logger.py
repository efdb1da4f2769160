#!/usr/bin/env python3
"""
Circle Method Toolkit 統一ログシステム
全モジュール共通のログ機能
"""
import functools
import logging
import os
import sys
from datetime import datetime
from pathlib import Path

from colorama import Fore, Style
from colorama import init as colorama_init

LOG_LEVEL_ENV = 'CIRCLE_TOOLKIT_LOG_LEVEL'
LOG_DIR_ENV = 'CIRCLE_TOOLKIT_LOG_DIR'

colorama_init(strip=False)


class _ConsoleFormatter(logging.Formatter):
    """コンソール用カラーフォーマッター"""

    COLORS = {
        'DEBUG': Fore.CYAN,
        'INFO': Fore.GREEN,
        'WARNING': Fore.YELLOW,
        'ERROR': Fore.RED,
        'CRITICAL': Fore.MAGENTA,
    }
    ICONS = {
        'DEBUG': '🔍',
        'INFO': '✅',
        'WARNING': '⚠️',
        'ERROR': '❌',
        'CRITICAL': '🚨',
    }

    def format(self, record):
        color = self.COLORS.get(record.levelname, '')
        icon = self.ICONS.get(record.levelname, '📝')
        return f"{icon} {color}{record.levelname}{Style.RESET_ALL} | {record.getMessage()}"


class CircleToolkitLogger:
    """Circle Method Toolkit 専用ログシステム"""

    _instances = {}

    def __new__(cls, name: str = "CircleToolkit"):
        if name not in cls._instances:
            cls._instances[name] = super().__new__(cls)
        return cls._instances[name]

    def __init__(self, name: str = "CircleToolkit"):
        if hasattr(self, '_initialized'):
            return

        self.name = name
        self.logger = logging.getLogger(f"circle_toolkit.{name}")
        self.logger.propagate = False
        self._initialized = True

        level = os.getenv(LOG_LEVEL_ENV, 'INFO').upper()
        self.logger.setLevel(getattr(logging, level, logging.INFO))

        if not self.logger.handlers:
            self._setup_handlers()

    def _setup_handlers(self):
        """ログハンドラー設定"""
        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setLevel(logging.INFO)
        console_handler.setFormatter(_ConsoleFormatter())
        self.logger.addHandler(console_handler)

        log_dir = Path(os.getenv(LOG_DIR_ENV, 'logs'))
        try:
            log_dir.mkdir(parents=True, exist_ok=True)
        except OSError:
            # 書き込み不可の環境ではコンソールのみ
            return

        formatter = logging.Formatter(
            '%(asctime)s | %(name)s | %(levelname)s | %(module)s:%(funcName)s:%(lineno)d | %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )

        file_handler = logging.FileHandler(log_dir / f"{self.name.lower()}.log", encoding='utf-8')
        file_handler.setLevel(logging.INFO)
        file_handler.setFormatter(formatter)
        self.logger.addHandler(file_handler)

        debug_handler = logging.FileHandler(log_dir / f"{self.name.lower()}_debug.log", encoding='utf-8')
        debug_handler.setLevel(logging.DEBUG)
        debug_handler.setFormatter(formatter)
        self.logger.addHandler(debug_handler)

    def set_console_level(self, level: int):
        """コンソール出力レベル変更"""
        for handler in self.logger.handlers:
            if isinstance(handler, logging.StreamHandler) and not isinstance(handler, logging.FileHandler):
                handler.setLevel(level)

    def debug(self, message: str, **kwargs):
        self.logger.debug(message, **kwargs)

    def info(self, message: str, **kwargs):
        self.logger.info(message, **kwargs)

    def warning(self, message: str, **kwargs):
        self.logger.warning(message, **kwargs)

    def error(self, message: str, **kwargs):
        self.logger.error(message, **kwargs)

    def critical(self, message: str, **kwargs):
        self.logger.critical(message, **kwargs)

    def success(self, message: str, **kwargs):
        """成功メッセージ（info扱い）"""
        self.info(f"✅ {message}", **kwargs)

    def progress(self, message: str, **kwargs):
        """進捗メッセージ（debug扱い、ループ内で多用されるため）"""
        self.debug(f"🔄 {message}", **kwargs)

    def start_operation(self, operation: str, **kwargs):
        self.info(f"🚀 {operation} を開始", **kwargs)

    def complete_operation(self, operation: str, **kwargs):
        self.success(f"{operation} が完了", **kwargs)

    def sum_info(self, message: str, **kwargs):
        """指数和の計算ログ"""
        self.debug(f"🧮 {message}", **kwargs)

    def bound_info(self, message: str, **kwargs):
        """指数計算（exponent calculus）ログ"""
        self.info(f"📐 {message}", **kwargs)

    def check_info(self, message: str, passed: bool = True, **kwargs):
        """検証結果ログ"""
        if passed:
            self.info(f"🔬 PASS {message}", **kwargs)
        else:
            self.warning(f"🔬 FAIL {message}", **kwargs)


def get_logger(name: str = "CircleToolkit") -> CircleToolkitLogger:
    """ログシステム取得"""
    return CircleToolkitLogger(name)


logger = get_logger()


def setup_logging(level: str = "INFO", console_output: bool = True):
    """ログ設定

    Args:
        level: ログレベル名
        console_output: Falseならコンソールへは警告以上のみ
    """
    os.environ[LOG_LEVEL_ENV] = level.upper()
    numeric = getattr(logging, level.upper(), logging.INFO)
    for instance in CircleToolkitLogger._instances.values():
        instance.logger.setLevel(numeric)
        instance.set_console_level(numeric if console_output else logging.WARNING)


def log_system_info():
    """システム情報ログ"""
    import platform

    import numpy
    import scipy
    import sympy

    logger.info("=== Circle Method Toolkit システム情報 ===")
    logger.info(f"OS: {platform.system()} {platform.release()}")
    logger.info(f"Python: {platform.python_version()}")
    logger.info(f"numpy: {numpy.__version__} / scipy: {scipy.__version__} / sympy: {sympy.__version__}")
    logger.info("=" * 50)


def log_exceptions(func):
    """例外ログデコレータ"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except Exception as e:
            logger.error(f"{func.__name__} でエラー発生: {e}")
            raise
    return wrapper


def log_execution_time(func):
    """実行時間ログデコレータ"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        start_time = datetime.now()
        logger.debug(f"{func.__name__} 開始")
        try:
            result = func(*args, **kwargs)
        except Exception as e:
            duration = (datetime.now() - start_time).total_seconds()
            logger.error(f"{func.__name__} エラー終了 (実行時間: {duration:.2f}秒): {e}")
            raise
        duration = (datetime.now() - start_time).total_seconds()
        logger.debug(f"{func.__name__} 完了 (実行時間: {duration:.2f}秒)")
        return result
    return wrapper
