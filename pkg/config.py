"""
生成的量子論シミュレータ - 設定管理モジュール

このモジュールは以下を提供します：
- 環境変数（.env ファイルを含む）からの実行環境の設定読み込み
- 設定値の検証（全てのエラーをまとめて報告）
- ログ設定の初期化
"""

import logging
import os
from pathlib import Path
from typing import List, Optional

from constants import DefaultValues, FilePaths, LogLevels, OutputFormats
from exceptions import ConfigError
from scenarios import RunSettings


class Config:
    """
    実行環境の設定管理クラス

    シナリオ自体の設定は設定ファイル（scenarios.load_config）で与え、
    ここでは出力先・ログ・既定のシードなど実行環境に関わる値を環境変数から読む。
    """

    def __init__(self, env_file: Optional[str] = None, setup_logging: bool = True):
        """
        設定初期化

        Args:
            env_file: .envファイルのパス（指定しない場合は .env を使用）
            setup_logging: ログ設定を初期化するか
        """
        self._load_env_file(env_file)
        self._validate_config()
        if setup_logging:
            self._setup_logging()

    def _load_env_file(self, env_file: Optional[str] = None):
        """環境変数ファイルを読み込み"""
        env_path = Path(env_file or ".env")
        if not env_path.exists():
            return
        with open(env_path, 'r', encoding='utf-8') as f:
            for line in f:
                line = line.strip()
                if line and not line.startswith('#') and '=' in line:
                    key, value = line.split('=', 1)
                    # 既に設定されている環境変数を優先
                    if key.strip() not in os.environ:
                        os.environ[key.strip()] = value.strip()

    # 出力設定
    @property
    def output_dir(self) -> Path:
        """出力ディレクトリ（書き出し時に作成）"""
        return Path(os.getenv('GQT_OUTPUT_DIR', FilePaths.OUTPUT_DIR))

    @property
    def output_format(self) -> str:
        return os.getenv('GQT_OUTPUT_FORMAT', OutputFormats.CSV).lower()

    # 実行設定
    @property
    def default_seed(self) -> int:
        return self._int('GQT_DEFAULT_SEED', DefaultValues.SEED)

    @property
    def workers(self) -> int:
        """試行を並列に実行するスレッド数"""
        return self._int('GQT_WORKERS', DefaultValues.WORKERS)

    # 安定性の判定
    @property
    def stability_eps(self) -> float:
        return self._float('GQT_STABILITY_EPS', DefaultValues.STABILITY_EPS)

    @property
    def stability_window(self) -> float:
        return self._float('GQT_STABILITY_WINDOW', DefaultValues.STABILITY_WINDOW)

    @property
    def size_threshold(self) -> int:
        return self._int('GQT_SIZE_THRESHOLD', DefaultValues.SIZE_THRESHOLD)

    # ログ設定
    @property
    def log_level(self) -> str:
        return os.getenv('LOG_LEVEL', DefaultValues.LOG_LEVEL).upper()

    @property
    def log_dir(self) -> Path:
        """ログディレクトリ"""
        log_path = Path(os.getenv('LOG_DIR', FilePaths.LOG_DIR))
        log_path.mkdir(parents=True, exist_ok=True)
        return log_path

    @property
    def log_file(self) -> Path:
        return self.log_dir / FilePaths.LOG_FILE

    @property
    def debug_mode(self) -> bool:
        return os.getenv('DEBUG_MODE', 'false').lower() in ('true', '1', 'yes')

    @staticmethod
    def _int(key: str, default: int) -> int:
        try:
            return int(os.getenv(key, str(default)))
        except ValueError:
            raise ConfigError(f"{key} は整数で指定してください", config_key=key, config_value=os.getenv(key))

    @staticmethod
    def _float(key: str, default: float) -> float:
        try:
            return float(os.getenv(key, str(default)))
        except ValueError:
            raise ConfigError(f"{key} は数値で指定してください", config_key=key, config_value=os.getenv(key))

    def _validate_config(self):
        """設定値の検証"""
        errors: List[str] = []
        checks = [
            ('GQT_DEFAULT_SEED', lambda: self.default_seed >= 0, "GQT_DEFAULT_SEED は0以上で指定してください"),
            ('GQT_WORKERS', lambda: self.workers >= 1, "GQT_WORKERS は1以上で指定してください"),
            ('GQT_STABILITY_EPS', lambda: 0 < self.stability_eps < 1, "GQT_STABILITY_EPS は (0, 1) で指定してください"),
            ('GQT_STABILITY_WINDOW', lambda: 0 < self.stability_window <= 1,
             "GQT_STABILITY_WINDOW は (0, 1] で指定してください"),
            ('GQT_SIZE_THRESHOLD', lambda: self.size_threshold >= 1, "GQT_SIZE_THRESHOLD は1以上で指定してください"),
        ]
        for _, check, message in checks:
            try:
                if not check():
                    errors.append(message)
            except ConfigError as e:
                errors.append(e.message)

        if self.log_level not in LogLevels.get_all():
            errors.append(f"不正なログレベル: {self.log_level} ({', '.join(LogLevels.get_all())}のいずれかを指定してください)")
        if self.output_format not in OutputFormats.get_all():
            errors.append(f"不正な出力形式: {self.output_format} (csv か json を指定してください)")

        if errors:
            raise ConfigError("設定エラー:\n" + "\n".join(f"- {error}" for error in errors), errors=errors)

    def _setup_logging(self):
        """ログ設定の初期化"""
        log_level = getattr(logging, self.log_level, logging.INFO)
        logging.basicConfig(
            level=log_level,
            format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            handlers=[
                logging.FileHandler(self.log_file, encoding='utf-8'),
                logging.StreamHandler()
            ]
        )
        if self.debug_mode:
            logging.getLogger().setLevel(logging.DEBUG)

    def run_settings(self) -> RunSettings:
        """設定ファイルで上書きされる前の実行の既定値"""
        return RunSettings(
            seed=self.default_seed,
            workers=self.workers,
            eps=self.stability_eps,
            window=self.stability_window,
            size_threshold=self.size_threshold,
            output_dir=str(self.output_dir),
            output_format=self.output_format,
        )

    def get_env_summary(self) -> dict:
        return {
            'output_dir': str(self.output_dir),
            'output_format': self.output_format,
            'default_seed': self.default_seed,
            'workers': self.workers,
            'stability_eps': self.stability_eps,
            'stability_window': self.stability_window,
            'size_threshold': self.size_threshold,
            'log_level': self.log_level,
            'debug_mode': self.debug_mode,
        }

    def __str__(self) -> str:
        lines = ["=== GQT Simulator Configuration ==="]
        for key, value in self.get_env_summary().items():
            lines.append(f"{key}: {value}")
        return "\n".join(lines)
