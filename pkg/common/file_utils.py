#!/usr/bin/env python3
"""
Circle Method Toolkit - ファイルユーティリティ
レポート（JSON/CSV）の保存・読み込みと設定ハッシュ
"""

import csv
import hashlib
import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from .logger import get_logger


def _json_default(value: Any) -> Any:
    """JSON化できない値の変換（有理数は "p/q" 文字列）"""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    return str(value)


def canonical_dumps(data: Any, indent: Optional[int] = 2) -> str:
    """キー順を固定したJSON文字列（同一入力ならバイト単位で同一）"""
    return json.dumps(data, sort_keys=True, ensure_ascii=False, indent=indent, default=_json_default)


class FileUtils:
    """レポート・設定ファイル操作ユーティリティクラス"""

    def __init__(self):
        self.logger = get_logger("FileUtils")

    def save_json(self, data: Any, file_path: Union[str, Path], indent: int = 2) -> bool:
        """
        JSON保存（キー順固定）

        Args:
            data: 保存するデータ
            file_path: ファイルパス
            indent: インデント

        Returns:
            保存成功フラグ
        """
        file_path = Path(file_path)
        try:
            file_path.parent.mkdir(parents=True, exist_ok=True)
            file_path.write_text(canonical_dumps(data, indent) + "\n", encoding='utf-8')
            self.logger.debug(f"JSON保存成功: {file_path}")
            return True
        except OSError as e:
            self.logger.error(f"JSON保存失敗 {file_path}: {e}")
            return False

    def load_json(self, file_path: Union[str, Path], default: Any = None) -> Any:
        """
        JSON読み込み

        Args:
            file_path: ファイルパス
            default: ファイルが無い場合の値

        Returns:
            読み込まれたデータ

        Raises:
            json.JSONDecodeError: 構文エラー（呼び出し元で ConfigError に変換）
        """
        file_path = Path(file_path)
        if not file_path.exists():
            self.logger.warning(f"JSONファイルが存在しません: {file_path}")
            return default
        with open(file_path, 'r', encoding='utf-8') as f:
            data = json.load(f)
        self.logger.debug(f"JSON読み込み成功: {file_path}")
        return data

    def save_csv(self, rows: Sequence[Dict[str, Any]], file_path: Union[str, Path],
                 fieldnames: Optional[List[str]] = None) -> bool:
        """
        CSV保存（レポートの表部分）

        Args:
            rows: 行データ（辞書のリスト）
            file_path: ファイルパス
            fieldnames: 列名（None: 先頭行のキー順）

        Returns:
            保存成功フラグ
        """
        file_path = Path(file_path)
        if not rows:
            self.logger.warning(f"CSV出力対象の行がありません: {file_path}")
            return False
        fieldnames = fieldnames or list(rows[0].keys())
        try:
            file_path.parent.mkdir(parents=True, exist_ok=True)
            with open(file_path, 'w', encoding='utf-8', newline='') as f:
                writer = csv.DictWriter(f, fieldnames=fieldnames, extrasaction='ignore')
                writer.writeheader()
                for row in rows:
                    writer.writerow({k: _json_default(v) if not isinstance(v, (int, float, str)) else v
                                     for k, v in row.items()})
            self.logger.debug(f"CSV保存成功: {file_path} ({len(rows)}行)")
            return True
        except OSError as e:
            self.logger.error(f"CSV保存失敗 {file_path}: {e}")
            return False

    def config_hash(self, config: Dict[str, Any]) -> str:
        """設定辞書の sha256（正規化JSONに対して計算）"""
        payload = canonical_dumps(config, indent=None).encode('utf-8')
        return hashlib.sha256(payload).hexdigest()


_file_utils_instance = None


def get_file_utils() -> FileUtils:
    """グローバルファイルユーティリティインスタンス取得"""
    global _file_utils_instance
    if _file_utils_instance is None:
        _file_utils_instance = FileUtils()
    return _file_utils_instance


def save_json(data: Any, file_path: Union[str, Path]) -> bool:
    """JSON保存便利関数"""
    return get_file_utils().save_json(data, file_path)


def load_json(file_path: Union[str, Path], default: Any = None) -> Any:
    """JSON読み込み便利関数"""
    return get_file_utils().load_json(file_path, default)
