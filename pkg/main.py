"""
生成的量子論シミュレータ - コマンドラインのエントリーポイント

## 主要機能
- **run**: 設定ファイルのシナリオを理論エンジンで実行し、イベントログ・統計表・相互作用グラフを出力
- **sweep**: 任意の数値パラメータ（section.key）をスイープ
- **export-graph**: EnDQTのイベントログから因果DAGをDOT形式で出力
- **verify**: 不変条件の検証スイート（eq3, dephasing, bell, sweep, structure）
- **bell**: ベル実験の相関とCHSH量

## 終了コード
- 0: 成功
- 1: 入力の検証エラー（設定・引数・ファイル）
- 2: 実行中の不変条件違反（バグとして報告すべき事象）

機械可読な出力は成功時にのみ、一時ファイルからの rename で書き出す。
"""

import logging
import sys
from typing import Optional, Sequence

from command_router import CommandRouter
from config import Config
from constants import ExitCodes
from exceptions import CommandParseError, ConfigError, FileOperationError, IntegrityError, ValidationError

logger = logging.getLogger(__name__)


def _report_error(prefix: str, error: Exception) -> None:
    print(f"{prefix}: {error}", file=sys.stderr)
    for message in getattr(error, 'errors', []) or []:
        print(f"  - {message}", file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    メインエントリーポイント関数

    Args:
        argv: 引数（省略時は sys.argv[1:]）

    Returns:
        終了コード
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        config = Config()
    except ConfigError as e:
        _report_error("設定エラー", e)
        return ExitCodes.VALIDATION_ERROR

    router = CommandRouter(config)
    try:
        command = router.parse_command(argv)
        result = router.route_command(command)
    except CommandParseError as e:
        _report_error("引数エラー", e)
        print(router.parser.format_usage(), file=sys.stderr, end='')
        return ExitCodes.VALIDATION_ERROR
    except IntegrityError as e:
        logger.critical(f"不変条件違反: {e}")
        _report_error("不変条件違反", e)
        return ExitCodes.INTEGRITY_FAILURE
    except (ConfigError, ValidationError, FileOperationError) as e:
        logger.error(f"検証エラー: {e}")
        _report_error("エラー", e)
        return ExitCodes.VALIDATION_ERROR

    print(result['message'])
    if result['exit_code'] != ExitCodes.SUCCESS:
        return result['exit_code']
    try:
        written = result['bundle'].commit(result['out'])
    except FileOperationError as e:
        _report_error("出力エラー", e)
        return ExitCodes.VALIDATION_ERROR
    for path in written:
        print(f"  -> {path}")
    return ExitCodes.SUCCESS


if __name__ == "__main__":
    sys.exit(main())
