"""
理論エンジン基底クラス

全ての理論エンジンの共通機能（射影・ボルン則による抽選・相関因子の探索）を提供します。
"""

import logging
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from constants import EdgeKinds, Tolerances
from decomodels import InteractionEntry
from differentiation import ProcessClass
from event_log import EventLog
from exceptions import IntegrityError, ValidationError
from hilbert import Observable, StateVector, embed_operator, mutual_information
from structures import StructureGraph

logger = logging.getLogger(__name__)


def default_pointer(state: StateVector, label: str) -> Observable:
    """既定のポインタ観測量（量子ビットは σz、それ以外は計算基底）"""
    dim = state.layout.dim_of(label)
    return Observable.pauli_z(label) if dim == 2 else Observable.computational(label, dim)


def pointer_value(value: float) -> float:
    """固有値を丸めて記録用の値にする"""
    return float(round(value, 9))


def branch_components(state: StateVector, label: str, pointer: Observable,
                      prune: float = Tolerances.WORLD_PRUNE) -> List[Tuple[float, float, StateVector]]:
    """
    ポインタ固有値ごとの成分 (固有値, 重み, 射影後の規格化状態)

    Args:
        state: 全体の状態
        label: ポインタを持つ因子
        pointer: その因子上の観測量
        prune: これ未満の重みの成分は除く
    """
    components = []
    for value, projector in pointer.projectors():
        full = embed_operator(projector, [label], state.layout)
        vector = full @ state.amplitudes
        weight = float(np.real(np.vdot(vector, vector)))
        if weight > prune:
            components.append((pointer_value(value), weight, StateVector.normalized(vector, state.layout)))
    return components


def joint_components(state: StateVector, labels: Sequence[str], pointers: Sequence[Observable],
                     prune: float = Tolerances.WORLD_PRUNE) -> List[Tuple[Tuple[float, ...], float, StateVector]]:
    """複数の因子のポインタを同時に射影した成分"""
    results: List[Tuple[Tuple[float, ...], float, StateVector]] = [((), 1.0, state)]
    for label, pointer in zip(labels, pointers):
        refined = []
        for values, weight, current in results:
            for value, sub_weight, projected in branch_components(current, label, pointer, prune=0.0):
                total = weight * sub_weight
                if total > prune:
                    refined.append((values + (value,), total, projected))
        results = refined
    return results


def sample_index(rng: np.random.Generator, weights: Sequence[float]) -> int:
    """ボルン則の重みから添字を抽選"""
    p = np.asarray(weights, dtype=float)
    total = p.sum()
    if total <= 0:
        raise IntegrityError("抽選の重みが全て0です", component='sampling', invariant='born-weights')
    return int(rng.choice(len(p), p=p / total))


def definite_value(state: StateVector, label: str, pointer: Observable,
                   threshold: float = 1 - 1e-9) -> Optional[float]:
    """因子のポインタ値が確定していればその値"""
    for value, weight, _ in branch_components(state, label, pointer, prune=0.0):
        if weight >= threshold:
            return value
    return None


def correlated_factors(state: StateVector, label: str, threshold: float = 1e-9) -> List[str]:
    """label と相互情報量が threshold を超える因子"""
    rho = state.to_density()
    return [other for other in state.layout.labels
            if other != label and mutual_information(rho, label, other) > threshold]


def resolve_destruction(graph: StructureGraph, label: str, value: float,
                        locations: Optional[Mapping[str, Mapping[float, str]]], t: float) -> bool:
    """
    潜在的破壊の自己辺を持つ系なら、値に対応する場所へ昇格する

    Returns:
        bool: label にDS側の辺を張れるなら True
    """
    graph.ensure_node(label)
    if not graph.has_potential_destruction(label):
        return True
    tag = (locations or {}).get(label, {}).get(value)
    if tag is None:
        logger.warning(f"場所タグが不明なため昇格を見送り: {label}={value}")
        return False
    graph.promote_destruction(label, tag, t)
    return True


class RunContext:
    """1試行分の実行状態"""

    def __init__(self, state: StateVector, graph: StructureGraph, rng: np.random.Generator,
                 log: EventLog, pointers: Optional[Dict[str, Observable]] = None):
        """
        Args:
            state: 現在の量子状態
            graph: 相互作用グラフ
            rng: この試行の乱数生成器
            log: イベントログ
            pointers: 因子ラベル → ポインタ観測量（省略時は既定）
        """
        self.state = state
        self.graph = graph
        self.rng = rng
        self.log = log
        self.pointers: Dict[str, Observable] = dict(pointers or {})
        self.values: Dict[Tuple[str, str], float] = {}
        self.time = 0.0
        self.extra: Dict[str, Any] = {}

    def pointer(self, label: str) -> Observable:
        if label not in self.pointers:
            self.pointers[label] = default_pointer(self.state, label)
        return self.pointers[label]

    def assign(self, system: str, value: float, t: float, prop: str = 'pointer', mark: bool = True) -> None:
        """決定値を記録（mark=True ならグラフ上でも決定済みにする）"""
        self.values[(system, prop)] = value
        if mark and system in self.graph.nodes:
            self.graph.mark_determinate(system, t)

    def value_table(self) -> Dict[str, float]:
        return {f"{system}.{prop}": value for (system, prop), value in sorted(self.values.items())}


class TheoryEngine:
    """全理論エンジンの基底クラス"""

    engine_type = ''

    def __init__(self, variant: Optional[str] = None, params: Optional[Any] = None):
        """
        エンジンの初期化

        Args:
            variant: 変種名（MWI・関係主義）
            params: エンジン固有のパラメータ
        """
        self.variant = variant
        self.params = params

    @property
    def name(self) -> str:
        return f"{self.engine_type}:{self.variant}" if self.variant else self.engine_type

    def prepare(self, ctx: RunContext) -> None:
        """試行開始時の準備"""

    def link_entangled(self, ctx: RunContext, a: str, b: str, t: float) -> None:
        """もつれた組を向きのないUDIで結ぶ"""
        ctx.graph.add_interaction(a, b, EdgeKinds.UDI, t)

    def advance(self, ctx: RunContext, t0: float, t1: float) -> None:
        """区間 (t0, t1] の確率過程（既定では何もしない）"""

    def on_interaction_end(self, ctx: RunContext, entry: InteractionEntry, evidence: ProcessClass) -> None:
        """
        相互作用の終了時の処理

        Raises:
            NotImplementedError: サブクラスで実装されていない場合
        """
        raise NotImplementedError("on_interaction_end must be implemented by subclass")

    def finish(self, ctx: RunContext) -> None:
        """試行終了時の検査"""

    def describe(self) -> Dict[str, Any]:
        return {'engine': self.engine_type, 'variant': self.variant}

    def _require(self, condition: bool, message: str, field: str) -> None:
        if not condition:
            raise ValidationError(message, field=field)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name})"
