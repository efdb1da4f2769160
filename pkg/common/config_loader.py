#!/usr/bin/env python3
"""
Circle Method Toolkit - 設定読み込み
config/toolkit_config.json を既定値とし、ユーザー設定を深いマージで上書きする
"""

import copy
import functools
import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional, Union

from .exceptions import ConfigError, raise_config_error
from .logger import get_logger

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config" / "toolkit_config.json"

logger = get_logger("ConfigLoader")


def parse_rational(value: Union[str, int, Fraction], key: str = "value") -> Fraction:
    """
    "p/q" 文字列・整数を厳密な有理数に変換

    Args:
        value: 入力値（浮動小数は受け付けない）
        key: エラー表示用の設定キー

    Returns:
        Fraction

    Raises:
        ConfigError: 解釈できない場合
    """
    if isinstance(value, bool) or isinstance(value, float):
        raise ConfigError(f"rational expected for {key}, got {value!r}", config_key=key)
    try:
        return Fraction(value)
    except (ValueError, TypeError, ZeroDivisionError) as e:
        raise ConfigError(f"cannot parse rational for {key}: {value!r} ({e})", config_key=key) from e


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


@functools.lru_cache(maxsize=1)
def _packaged_defaults() -> str:
    return DEFAULT_CONFIG_PATH.read_text(encoding='utf-8')


def load_config(path: Optional[Union[str, Path]] = None,
                overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    設定読み込み

    Args:
        path: ユーザー設定JSON（None: 既定値のみ）
        overrides: さらに上書きする辞書（CLI引数など）

    Returns:
        マージ済み設定辞書

    Raises:
        ConfigError: JSON構文エラー・型不一致
    """
    config = json.loads(_packaged_defaults())

    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file missing: {path}", config_key=str(path))
        try:
            user = json.loads(path.read_text(encoding='utf-8'))
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed JSON in {path}: {e}") from e
        if not isinstance(user, dict):
            raise ConfigError(f"config root must be an object: {path}")
        config = _deep_merge(config, user)
        logger.debug(f"ユーザー設定をマージ: {path}")

    if overrides:
        config = _deep_merge(config, overrides)

    _validate(config)
    return config


def _validate(config: Dict[str, Any]):
    for section in ("guards", "tolerances", "weights", "delta"):
        if not isinstance(config.get(section), dict):
            raise ConfigError(f"missing config section: {section}", config_key=section)
    for key, limit in config["guards"].items():
        if not isinstance(limit, int) or limit <= 0:
            raise ConfigError(f"guard must be a positive integer: {key}={limit!r}", config_key=f"guards.{key}")
    rho = parse_rational(config["weights"]["rho"], "weights.rho")
    if not 0 < rho <= 1:
        raise_config_error(f"weights.rho must lie in (0, 1]: {rho}", "weights.rho")
    if config["weights"].get("profile") not in ("square", "abs"):
        raise_config_error("weights.profile must be 'square' or 'abs'", "weights.profile")
    if config["delta"].get("c_q", "exact") not in ("exact", "unit"):
        raise_config_error("delta.c_q must be 'exact' or 'unit'", "delta.c_q")
    theta = parse_rational(config["delta"].get("accept_theta", "1/2"), "delta.accept_theta")
    if not 0 < theta < 1:
        raise_config_error(f"delta.accept_theta must lie in (0, 1): {theta}", "delta.accept_theta")


_active_config: Optional[Dict[str, Any]] = None


@functools.lru_cache(maxsize=1)
def _packaged_config() -> Dict[str, Any]:
    return load_config()


def activate_config(config: Optional[Dict[str, Any]]):
    """
    default_config() が返す設定を差し替える（None で既定値に戻す）

    構築済みのキャッシュ（DeltaKernel など）には反映されないため、計算の前に呼ぶこと。
    """
    global _active_config
    _active_config = config


def default_config() -> Dict[str, Any]:
    """有効な設定（読み取り専用として扱うこと）"""
    return _active_config if _active_config is not None else _packaged_config()


def get_guard(name: str, config: Optional[Dict[str, Any]] = None) -> int:
    """ガード値の取得"""
    config = config or default_config()
    try:
        return int(config["guards"][name])
    except KeyError as e:
        raise ConfigError(f"missing guard: {name}", config_key=f"guards.{name}") from e
