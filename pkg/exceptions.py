"""
生成的量子論シミュレータ - カスタム例外

アプリケーション全体で使用するカスタム例外クラスを定義します。
"""

from typing import Optional, Dict, Any, List


class GqtSimError(Exception):
    """シミュレータの基底例外クラス"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        """
        例外を初期化

        Args:
            message: エラーメッセージ
            details: 詳細情報
        """
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def __str__(self) -> str:
        """文字列表現"""
        if self.details:
            return f"{self.message} (詳細: {self.details})"
        return self.message


class ValidationError(GqtSimError):
    """入力検証エラー（不正入力の拒否）"""

    def __init__(self, message: str, field: Optional[str] = None, value: Optional[Any] = None):
        """
        バリデーションエラーを初期化

        Args:
            message: エラーメッセージ
            field: 検証対象フィールド
            value: 検証対象値
        """
        details = {}
        if field:
            details['field'] = field
        if value is not None:
            details['value'] = value

        super().__init__(message, details)
        self.field = field
        self.value = value


class DimensionError(ValidationError):
    """次元不一致エラー"""

    def __init__(self, message: str, expected: Optional[Any] = None, actual: Optional[Any] = None):
        super().__init__(message, field='dimension', value=actual)
        if expected is not None:
            self.details['expected'] = expected
        self.expected = expected
        self.actual = actual


class IntegrityError(GqtSimError):
    """実行中の不変条件違反（常にバグ報告の対象）"""

    def __init__(self, message: str, component: Optional[str] = None, invariant: Optional[str] = None):
        """
        整合性エラーを初期化

        Args:
            message: エラーメッセージ
            component: 対象コンポーネント
            invariant: 破れた不変条件
        """
        details = {}
        if component:
            details['component'] = component
        if invariant:
            details['invariant'] = invariant

        super().__init__(message, details)
        self.component = component
        self.invariant = invariant


class ConfigError(GqtSimError):
    """設定関連エラー"""

    def __init__(self, message: str, config_key: Optional[str] = None,
                 config_value: Optional[str] = None, errors: Optional[List[str]] = None):
        """
        設定エラーを初期化

        Args:
            message: エラーメッセージ
            config_key: 設定キー
            config_value: 設定値
            errors: パス付きエラーメッセージの一覧
        """
        details = {}
        if config_key:
            details['config_key'] = config_key
        if config_value:
            details['config_value'] = config_value

        super().__init__(message, details)
        self.config_key = config_key
        self.config_value = config_value
        self.errors = list(errors or [])


class ScheduleError(ValidationError):
    """相互作用スケジュール関連エラー"""

    def __init__(self, message: str, tag: Optional[str] = None, entry: Optional[Any] = None):
        super().__init__(message, field='schedule', value=entry)
        if tag:
            self.details['tag'] = tag
        self.tag = tag
        self.entry = entry


class StructureError(ValidationError):
    """相互作用グラフ操作の拒否"""

    def __init__(self, message: str, node: Optional[str] = None, operation: Optional[str] = None):
        super().__init__(message, field='structure', value=node)
        if operation:
            self.details['operation'] = operation
        self.node = node
        self.operation = operation


class EngineError(ValidationError):
    """理論エンジンの前提条件エラー"""

    def __init__(self, message: str, engine: Optional[str] = None, operation: Optional[str] = None):
        super().__init__(message, field='engine', value=engine)
        if operation:
            self.details['operation'] = operation
        self.engine = engine
        self.operation = operation


class CommandParseError(GqtSimError):
    """コマンド解析エラー"""

    def __init__(self, message: str, command: Optional[str] = None, command_type: Optional[str] = None):
        """
        コマンド解析エラーを初期化

        Args:
            message: エラーメッセージ
            command: 元のコマンド文字列
            command_type: コマンドタイプ
        """
        details = {}
        if command:
            details['command'] = command
        if command_type:
            details['command_type'] = command_type

        super().__init__(message, details)
        self.command = command
        self.command_type = command_type


class FileOperationError(GqtSimError):
    """ファイル操作エラー"""

    def __init__(self, message: str, file_path: Optional[str] = None, operation: Optional[str] = None):
        """
        ファイル操作エラーを初期化

        Args:
            message: エラーメッセージ
            file_path: ファイルパス
            operation: 実行操作
        """
        details = {}
        if file_path:
            details['file_path'] = file_path
        if operation:
            details['operation'] = operation

        super().__init__(message, details)
        self.file_path = file_path
        self.operation = operation
