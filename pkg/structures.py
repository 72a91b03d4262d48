"""
生成的量子論シミュレータ - 相互作用グラフ

このモジュールは以下を提供します：
- 系をノード、相互作用を型付きの辺とするグラフ（StructureGraph）
- 決定構造(DS)／不決定構造(IS)への分割
- 潜在的破壊相互作用から実際の破壊への昇格
- DOT形式の出力とJSONスナップショット
"""

import copy
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set, Tuple

import networkx as nx

from constants import EdgeKinds, NodeKinds, StructureClasses, ErrorMessages
from exceptions import IntegrityError, StructureError
from gqttypes import EdgeSnapshot, GraphSnapshot, NodeSnapshot

logger = logging.getLogger(__name__)


@dataclass
class SystemNode:
    """系ノード"""
    id: str
    kind: str = NodeKinds.NON_GENERATOR
    locations: Set[str] = field(default_factory=set)
    determinate: bool = False

    @property
    def is_generator(self) -> bool:
        """生成子の能力を持つか（イニシエータは生成子でもある）"""
        return self.kind in (NodeKinds.GENERATOR, NodeKinds.INITIATOR)

    def to_dict(self) -> NodeSnapshot:
        return {
            'id': self.id,
            'kind': self.kind,
            'locations': sorted(self.locations),
            'determinate': self.determinate,
        }


@dataclass
class Edge:
    """型付きの相互作用辺"""
    source: str
    target: str
    kind: str
    created_at: float
    directed: bool
    locations: Optional[Tuple[str, str]] = None
    live: bool = True

    @property
    def is_self(self) -> bool:
        return self.source == self.target

    def to_dict(self) -> EdgeSnapshot:
        return {
            'source': self.source,
            'target': self.target,
            'kind': self.kind,
            'created_at': self.created_at,
            'directed': self.directed,
            'locations': list(self.locations) if self.locations else None,
            'live': self.live,
        }


# DOT出力での辺のスタイル
_EDGE_STYLES = {
    EdgeKinds.SDI: 'solid',
    EdgeKinds.UDI: 'dashed',
    EdgeKinds.POTENTIAL_DESTRUCTION: 'dotted',
    EdgeKinds.DESTRUCTION: '"bold,dashed"',
}


def _quote(text: str) -> str:
    return '"' + text.replace('\\', '\\\\').replace('"', '\\"') + '"'


class StructureGraph:
    """相互作用グラフ（単一書き込み）"""

    def __init__(self):
        self.nodes: Dict[str, SystemNode] = {}
        self.edges: List[Edge] = []
        self.last_time = 0.0
        self._partition: Optional[Dict[str, str]] = None

    # ---- ノード ----

    def add_node(self, node_id: str, kind: str = NodeKinds.NON_GENERATOR,
                 locations: Iterable[str] = ()) -> SystemNode:
        """
        ノードを追加

        Args:
            node_id: 系ラベル
            kind: Generator / NonGenerator / Initiator
            locations: 場所タグ（複数の場所にある「部分」）
        """
        if node_id in self.nodes:
            raise StructureError(f"ノードが既に存在します: {node_id}", node=node_id, operation='add_node')
        if kind not in NodeKinds.get_all():
            raise StructureError(f"未知のノード種別です: {kind}", node=node_id, operation='add_node')
        node = SystemNode(node_id, kind, set(locations))
        self.nodes[node_id] = node
        self._partition = None
        return node

    def ensure_node(self, node_id: str, kind: str = NodeKinds.NON_GENERATOR) -> SystemNode:
        """ノードがなければ追加して返す"""
        if node_id in self.nodes:
            return self.nodes[node_id]
        return self.add_node(node_id, kind)

    def node(self, node_id: str) -> SystemNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise StructureError(f"{ErrorMessages.UNKNOWN_LABEL}: {node_id}", node=node_id, operation='lookup')

    def mark_determinate(self, node_id: str, t: float) -> None:
        """決定値を持った履歴を記録（ノードはDSに入る）"""
        self._check_time(t, node_id, 'mark_determinate')
        self.node(node_id).determinate = True
        self.last_time = t
        self._partition = None
        self._retire_absorbed_edges(t)

    # ---- 辺 ----

    def live_edges(self, kind: Optional[str] = None) -> List[Edge]:
        return [e for e in self.edges if e.live and (kind is None or e.kind == kind)]

    def has_potential_destruction(self, node_id: str) -> bool:
        return any(e.is_self and e.source == node_id for e in self.live_edges(EdgeKinds.POTENTIAL_DESTRUCTION))

    def location_count(self) -> int:
        return sum(len(n.locations) for n in self.nodes.values())

    def _check_time(self, t: float, node_id: Optional[str], operation: str) -> None:
        if t < self.last_time:
            raise StructureError(f"時刻が逆行しています: {t} < {self.last_time}", node=node_id, operation=operation)

    def add_interaction(self, source: str, target: str, kind: str, t: float,
                        directed: Optional[bool] = None,
                        locations: Optional[Tuple[str, str]] = None) -> 'StructureGraph':
        """
        相互作用の辺を追加

        Args:
            source: 始点の系
            target: 終点の系（PotentialDestruction では source と同じ）
            kind: 辺の種類
            t: 論理時刻（単調非減少）
            directed: 向きの有無（省略時は辺の種類の既定）
            locations: 自己辺の場所タグの組

        Returns:
            StructureGraph: 自分自身

        Raises:
            StructureError: 辺の種類と向きの規則に反する場合
        """
        operation = 'add_interaction'
        if not EdgeKinds.is_valid(kind):
            raise StructureError(f"未知の辺の種類です: {kind}", node=source, operation=operation)
        self._check_time(t, source, operation)
        self.node(source)
        self.node(target)

        if kind == EdgeKinds.DESTRUCTION:
            raise StructureError("破壊の辺は promote_destruction でのみ作成できます", node=source, operation=operation)
        if directed is None:
            directed = kind == EdgeKinds.SDI
        if kind == EdgeKinds.SDI and not directed:
            raise StructureError("SDIは向きを持たなければなりません", node=source, operation=operation)
        if kind == EdgeKinds.POTENTIAL_DESTRUCTION:
            if directed:
                raise StructureError("潜在的破壊の辺は向きを持ちません", node=source, operation=operation)
            if source != target:
                raise StructureError("潜在的破壊は系の部分同士の自己辺です", node=source, operation=operation)
            locations = self._potential_locations(source, locations)
        elif source == target:
            raise StructureError(f"{kind} の自己ループは許されません", node=source, operation=operation)

        if kind in EdgeKinds.DS_CLASS:
            for label in (source, target):
                if self.has_potential_destruction(label):
                    raise StructureError(f"潜在的破壊の辺を持つ系です（先に昇格してください）: {label}",
                                         node=label, operation=operation)
        else:
            partition = self.partition()
            if (source != target and partition[source].startswith(StructureClasses.DS)
                    and partition[source] == partition[target]):
                raise StructureError(f"DS内部にIS側の辺は追加できません: {source}-{target}",
                                     node=source, operation=operation)

        self.edges.append(Edge(source, target, kind, float(t), bool(directed), locations))
        self.last_time = t
        self._partition = None
        if kind in EdgeKinds.DS_CLASS:
            self._retire_absorbed_edges(t)
        logger.debug(f"辺を追加: {source} -> {target} ({kind}, t={t:g})")
        return self

    def _potential_locations(self, node_id: str, locations: Optional[Tuple[str, str]]) -> Tuple[str, str]:
        tags = self.node(node_id).locations
        if len(tags) < 2:
            raise StructureError(f"場所タグが2つ以上必要です: {node_id}", node=node_id, operation='add_interaction')
        if locations is None:
            ordered = sorted(tags)
            return ordered[0], ordered[1]
        first, second = locations
        if first == second or first not in tags or second not in tags:
            raise StructureError(f"自己辺の場所タグが不正です: {locations}", node=node_id, operation='add_interaction')
        return first, second

    def _retire_absorbed_edges(self, t: float) -> None:
        # 一つのDSに取り込まれたIS側の辺は失効させる
        partition = self._components_by_class()
        for edge in self.live_edges():
            if edge.kind not in EdgeKinds.IS_CLASS or edge.is_self:
                continue
            component = partition[edge.source]
            if component.startswith(StructureClasses.DS) and component == partition[edge.target]:
                edge.live = False
                logger.debug(f"DSに取り込まれた辺を失効: {edge.source}-{edge.target} (t={t:g})")
        self._partition = None

    def promote_destruction(self, node_id: str, surviving_location: str, t: float) -> 'StructureGraph':
        """
        潜在的破壊を実際の破壊に昇格

        残る場所から破壊される場所ごとに向き付きの Destruction 辺を作り、
        破壊された場所タグを取り除く。逆操作はない。

        Raises:
            StructureError: 潜在的破壊の辺がない、または場所が不正な場合
        """
        operation = 'promote_destruction'
        node = self.node(node_id)
        self._check_time(t, node_id, operation)
        potentials = [e for e in self.live_edges(EdgeKinds.POTENTIAL_DESTRUCTION) if e.is_self and e.source == node_id]
        if not potentials:
            raise StructureError(f"潜在的破壊の辺がありません: {node_id}", node=node_id, operation=operation)
        if len(node.locations) < 2:
            raise StructureError(f"破壊する場所がありません: {node_id}", node=node_id, operation=operation)
        if surviving_location not in node.locations:
            raise StructureError(f"未知の場所タグです: {surviving_location}", node=node_id, operation=operation)

        for edge in potentials:
            edge.live = False
        destroyed = sorted(node.locations - {surviving_location})
        for tag in destroyed:
            self.edges.append(Edge(node_id, node_id, EdgeKinds.DESTRUCTION, float(t), True, (surviving_location, tag)))
        node.locations = {surviving_location}
        node.determinate = True
        self.last_time = t
        self._partition = None
        self._retire_absorbed_edges(t)
        logger.info(f"破壊に昇格: {node_id} は {surviving_location} に残り {destroyed} が消失 (t={t:g})")
        return self

    # ---- 分割 ----

    def _ds_nodes(self) -> Set[str]:
        members = {n.id for n in self.nodes.values() if n.determinate}
        for edge in self.live_edges():
            if edge.kind in EdgeKinds.DS_CLASS:
                members.update((edge.source, edge.target))
        return members

    def partition(self) -> Dict[str, str]:
        """
        各ノードを DS(id) / IS(id) に割り当て

        DSは DS側の辺（SDI・Destruction）の連結成分、ISは残りのノードの
        IS側の辺（UDI・PotentialDestruction）の連結成分。成分の番号は最小のノードIDの順。

        Raises:
            IntegrityError: IS側の辺が一つのDSの内部にある場合
        """
        if self._partition is not None:
            return dict(self._partition)

        result = self._components_by_class()
        for edge in self.live_edges():
            if edge.kind in EdgeKinds.IS_CLASS and not edge.is_self:
                component = result[edge.source]
                if component.startswith(StructureClasses.DS) and component == result[edge.target]:
                    logger.error(f"{ErrorMessages.INTEGRITY_FAILURE}: {edge.kind} {edge.source}-{edge.target} が {component} の内部にあります")
                    raise IntegrityError(f"DSとISが混在した成分があります: {component}",
                                         component=component, invariant='mixed-component')
        self._partition = result
        return dict(result)

    def _components_by_class(self) -> Dict[str, str]:
        ds_nodes = self._ds_nodes()
        ds_graph = nx.Graph()
        ds_graph.add_nodes_from(ds_nodes)
        is_graph = nx.Graph()
        is_graph.add_nodes_from(n for n in self.nodes if n not in ds_nodes)
        for edge in self.live_edges():
            if edge.kind in EdgeKinds.DS_CLASS:
                ds_graph.add_edge(edge.source, edge.target)
            elif edge.source not in ds_nodes and edge.target not in ds_nodes:
                is_graph.add_edge(edge.source, edge.target)

        result: Dict[str, str] = {}
        for prefix, graph in ((StructureClasses.DS, ds_graph), (StructureClasses.IS, is_graph)):
            components = sorted((sorted(c) for c in nx.connected_components(graph)), key=lambda c: c[0])
            for index, members in enumerate(components, start=1):
                for member in members:
                    result[member] = f"{prefix}{index}"
        return result

    def structure_class(self, node_id: str) -> str:
        """ノードの分割クラス（'DS' / 'IS'）"""
        self.node(node_id)
        label = self.partition()[node_id]
        return StructureClasses.DS if label.startswith(StructureClasses.DS) else StructureClasses.IS

    def components(self) -> Dict[str, List[str]]:
        """成分ID → 所属ノード"""
        result: Dict[str, List[str]] = {}
        for node_id, component in sorted(self.partition().items()):
            result.setdefault(component, []).append(node_id)
        return result

    def to_networkx(self) -> nx.MultiDiGraph:
        """有効な辺のみを含む networkx グラフ"""
        graph = nx.MultiDiGraph()
        for node in self.nodes.values():
            graph.add_node(node.id, kind=node.kind)
        for edge in self.live_edges():
            graph.add_edge(edge.source, edge.target, kind=edge.kind, created_at=edge.created_at)
        return graph

    # ---- 出力 ----

    def export_dot(self) -> str:
        """
        DOT形式の有向グラフ

        ノードはID順、辺は作成順。DSのノードは黒、ISのノードは灰色。
        """
        partition = self.partition()
        lines = ['digraph G {']
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            color = 'black' if partition[node_id].startswith(StructureClasses.DS) else 'grey'
            label = node_id
            if node.locations:
                label += ' {' + ','.join(sorted(node.locations)) + '}'
            lines.append(f"  {_quote(node_id)} [label={_quote(label)}, color={color}, fontcolor={color}];")
        for edge in self.live_edges():
            attributes = [f"style={_EDGE_STYLES[edge.kind]}"]
            if not edge.directed:
                attributes.append('dir=none')
            text = f"{edge.kind} t={edge.created_at:g}"
            if edge.locations:
                text += f" {edge.locations[0]}->{edge.locations[1]}"
            attributes.append(f"label={_quote(text)}")
            lines.append(f"  {_quote(edge.source)} -> {_quote(edge.target)} [{', '.join(attributes)}];")
        lines.append('}')
        return '\n'.join(lines) + '\n'

    def to_dict(self) -> GraphSnapshot:
        return {
            'nodes': [self.nodes[n].to_dict() for n in sorted(self.nodes)],
            'edges': [e.to_dict() for e in self.edges],
        }

    @classmethod
    def from_dict(cls, data: GraphSnapshot) -> 'StructureGraph':
        """スナップショットから復元"""
        graph = cls()
        for item in data.get('nodes', []):
            node = graph.add_node(item['id'], item.get('kind', NodeKinds.NON_GENERATOR), item.get('locations', []))
            node.determinate = bool(item.get('determinate', False))
        for item in data.get('edges', []):
            if not EdgeKinds.is_valid(item['kind']):
                raise StructureError(f"未知の辺の種類です: {item['kind']}", node=item['source'], operation='from_dict')
            graph.node(item['source'])
            graph.node(item['target'])
            locations = tuple(item['locations']) if item.get('locations') else None
            graph.edges.append(Edge(item['source'], item['target'], item['kind'], float(item['created_at']),
                                    bool(item['directed']), locations, bool(item.get('live', True))))
            graph.last_time = max(graph.last_time, float(item['created_at']))
        graph.partition()
        return graph

    def snapshot(self) -> 'StructureGraph':
        """独立したコピー（読み取り側に渡す）"""
        return copy.deepcopy(self)

    def __repr__(self) -> str:
        return f"StructureGraph(nodes={len(self.nodes)}, edges={len(self.live_edges())})"
