"""
生成的量子論シミュレータ - イベントログと出力ファイル

このモジュールは以下を提供します：
- 論理時刻のみを持つ決定的な JSON-lines イベントログ
- CSV表の書き出しと読み込み
- 一時ファイル経由のアトミックな書き込み
"""

import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from exceptions import FileOperationError
from gqttypes import EventRecord

logger = logging.getLogger(__name__)


class EventLog:
    """シナリオ実行中のイベント列"""

    def __init__(self, engine: str = ''):
        self.engine = engine
        self.records: List[EventRecord] = []

    def emit(self, t: float, event_type: str, system: Optional[str] = None, **data: Any) -> EventRecord:
        """
        イベントを追加

        Args:
            t: 論理時刻
            event_type: EventTypes の値
            system: 主な系ラベル
            **data: イベント固有のデータ（JSONに変換できる値）
        """
        record: EventRecord = {
            'seq': len(self.records),
            't': float(t),
            'type': event_type,
            'system': system,
            'engine': self.engine,
            'data': data,
        }
        self.records.append(record)
        return record

    def extend(self, other: 'EventLog', **extra: Any) -> None:
        """別のログを連番を振り直して連結"""
        for record in other.records:
            data = dict(record['data'])
            data.update(extra)
            self.emit(record['t'], record['type'], record.get('system'), **data)

    def of_type(self, event_type: str) -> List[EventRecord]:
        return [r for r in self.records if r['type'] == event_type]

    def __len__(self) -> int:
        return len(self.records)

    def to_jsonl(self) -> str:
        """JSON-lines 文字列（キー順固定で同じ実行なら同じバイト列）"""
        lines = [json.dumps(r, ensure_ascii=False, sort_keys=True, default=_to_json) for r in self.records]
        return ''.join(line + '\n' for line in lines)

    @classmethod
    def from_jsonl(cls, text: str) -> 'EventLog':
        log = cls()
        for number, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise FileOperationError(f"イベントログの {number} 行目が不正です: {e}", operation='parse')
            log.engine = record.get('engine', log.engine)
            log.records.append(record)
        return log

    @classmethod
    def read(cls, path: Path) -> 'EventLog':
        return cls.from_jsonl(read_text(path))


def _to_json(value: Any) -> Any:
    # numpy のスカラーや集合を JSON 値にする
    if hasattr(value, 'item'):
        return value.item()
    if isinstance(value, (set, frozenset, tuple)):
        return sorted(value) if isinstance(value, (set, frozenset)) else list(value)
    raise TypeError(f"JSONに変換できません: {type(value).__name__}")


def to_json(data: Any) -> str:
    """整形済みJSON文字列"""
    return json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True, default=_to_json) + '\n'


def rows_to_csv(rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


def csv_to_rows(text: str) -> List[List[str]]:
    return [row for row in csv.reader(io.StringIO(text)) if row]


def rows_to_json(rows: Sequence[Sequence[Any]]) -> str:
    """ヘッダ付きの行を辞書のリストとしてJSON化"""
    if not rows:
        return to_json([])
    header = list(rows[0])
    return to_json([dict(zip(header, row)) for row in rows[1:]])


def read_text(path: Path) -> str:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return f.read()
    except OSError as e:
        raise FileOperationError(f"ファイルを読み込めません: {path} ({e})", file_path=str(path), operation='read')


def write_atomic(path: Path, text: str) -> None:
    """
    一時ファイルに書いてから rename する

    Raises:
        FileOperationError: 書き込みに失敗した場合（部分的なファイルは残らない）
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, temp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix='.tmp', dir=path.parent)
        try:
            with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
                f.write(text)
            os.replace(temp_name, path)
        except BaseException:
            if os.path.exists(temp_name):
                os.unlink(temp_name)
            raise
    except OSError as e:
        raise FileOperationError(f"ファイルを書き込めません: {path} ({e})", file_path=str(path), operation='write')
    logger.debug(f"ファイル出力: {path}")


class OutputBundle:
    """成功時にまとめて書き出す出力ファイル群"""

    def __init__(self):
        self.files: Dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def commit(self, directory: Path) -> List[Path]:
        """全ファイルをアトミックに書き出す"""
        written = []
        for name in sorted(self.files):
            path = Path(directory) / name
            write_atomic(path, self.files[name])
            written.append(path)
        logger.info(f"出力完了: {len(written)} ファイル -> {directory}")
        return written
