"""
生成的量子論シミュレータ - 型定義

アプリケーション全体で使用する辞書形式のレコードの型を定義します。
"""

from typing import TypedDict, Literal, Optional, List, Dict, Any

# 辺の種類
EdgeKindType = Literal['SDI', 'UDI', 'PotentialDestruction', 'Destruction']

# 分割クラス
StructureClassType = Literal['DS', 'IS']

# 出力形式
OutputFormatType = Literal['csv', 'json']


# コマンド辞書の型
class CommandDict(TypedDict):
    """パースされたコマンド辞書"""
    type: str
    config: Optional[str]
    param: Optional[str]
    values: Optional[List[str]]
    log: Optional[str]
    suite: Optional[str]
    angles: Optional[List[float]]
    engine: Optional[str]
    variant: Optional[str]
    exact: bool
    workers: Optional[int]
    trials: Optional[int]
    seed: Optional[int]
    out: Optional[str]
    format: Optional[str]


# イベントログのエントリ
class EventRecord(TypedDict, total=False):
    """JSON-lines イベントログの1行"""
    seq: int
    t: float
    type: str
    system: Optional[str]
    engine: str
    data: Dict[str, Any]


# 構造グラフのスナップショット
class NodeSnapshot(TypedDict):
    """ノードのスナップショット"""
    id: str
    kind: str
    locations: List[str]
    determinate: bool


class EdgeSnapshot(TypedDict):
    """辺のスナップショット"""
    source: str
    target: str
    kind: str
    created_at: float
    directed: bool
    locations: Optional[List[str]]
    live: bool


class GraphSnapshot(TypedDict):
    """構造グラフ全体のスナップショット"""
    nodes: List[NodeSnapshot]
    edges: List[EdgeSnapshot]


# 弱測定スイープの1行
class SweepRow(TypedDict):
    """スイープ表の1行"""
    parameter: str
    value: float
    degree: float
    process_class: str
    events: int


# 実行レポートの要約
class RunSummary(TypedDict):
    """RunReport の JSON 要約"""
    scenario: str
    engine: str
    variant: Optional[str]
    seed: int
    trials: int
    final_time: float
    events: int
    partition: Dict[str, str]
    statistics: Dict[str, Any]
