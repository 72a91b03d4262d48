"""
EnDQT（決定能力の伝播）エンジン

決定能力（DC）を持つ系との準不可逆な相互作用だけが決定値を生む。
DCはイニシエータから始まり、相互作用の時間的な重なりと非撹乱の条件を
満たすときにだけ次の系へ渡される（安定決定連鎖、SDC）。
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Set, Tuple

import numpy as np

from constants import (
    DefaultValues, EdgeKinds, EngineTypes, EventTypes, InitiatorKinds, NodeKinds, Tolerances,
)
from decomodels import InteractionEntry, InteractionSchedule, record_factor
from differentiation import ProcessClass, commutativity_check
from exceptions import IntegrityError, ValidationError
from hilbert import Observable, SpaceLayout, StateVector
from structures import StructureGraph

from .base_engine import (
    RunContext, TheoryEngine, default_pointer, joint_components, resolve_destruction, sample_index,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DcRecord:
    """holder が target についての決定能力を via から得た記録"""
    holder: str
    target: str
    granted_at: float
    via: str

    def to_dict(self) -> dict:
        return {'holder': self.holder, 'target': self.target, 'granted_at': self.granted_at, 'via': self.via}


class EnDqtParams:
    """EnDQTのパラメータ"""

    def __init__(self, initiators: Optional[Mapping[str, str]] = None,
                 eps: float = DefaultValues.STABILITY_EPS,
                 window: float = DefaultValues.STABILITY_WINDOW,
                 size_threshold: int = DefaultValues.SIZE_THRESHOLD,
                 env_qubits: int = DefaultValues.ENV_QUBITS,
                 touching_counts: bool = False,
                 disturbance_tol: float = Tolerances.DISTURBANCE,
                 composites: Optional[Mapping[str, List[str]]] = None):
        """
        Args:
            initiators: 系ラベル → 種類（'A': 全ての系へのDCを既定で持つ、'B': モデルで割り当てる）
            eps: classify_process の閾値
            window: classify_process の末尾窓の割合
            size_threshold: 準不可逆とみなす環境の最小サイズ
            env_qubits: 相互作用ごとのデコヒーレンスの根拠に使う環境量子ビット数
            touching_counts: 終了と同時に始まる相互作用も「重なり」とみなす
            disturbance_tol: 非撹乱判定の許容誤差
            composites: 複合系ラベル → 部分系ラベル
        """
        self.initiators: Dict[str, str] = dict(initiators or {})
        for label, kind in self.initiators.items():
            if kind not in (InitiatorKinds.A, InitiatorKinds.B):
                raise ValidationError(f"endqt.initiators: unknown kind {kind!r} for {label}",
                                      field='endqt.initiators', value=kind)
        self.eps = eps
        self.window = window
        self.size_threshold = size_threshold
        self.env_qubits = env_qubits
        self.touching_counts = touching_counts
        self.disturbance_tol = disturbance_tol
        self.composites: Dict[str, List[str]] = {k: list(v) for k, v in (composites or {}).items()}


class DcLedger:
    """DCの台帳"""

    def __init__(self, initiators: Optional[Mapping[str, str]] = None,
                 composites: Optional[Mapping[str, List[str]]] = None):
        self.initiators: Dict[str, str] = dict(initiators or {})
        self.composites: Dict[str, List[str]] = {k: list(v) for k, v in (composites or {}).items()}
        self.records: List[DcRecord] = []
        self.denials: List[dict] = []

    def add(self, record: DcRecord) -> None:
        if record.holder == record.target:
            raise ValidationError(f"自分自身へのDCは記録できません: {record.holder}", field='holder', value=record.holder)
        self.records.append(record)

    def has_record(self, holder: str, target: str, t: Optional[float] = None) -> bool:
        return any(r.holder == holder and r.target == target and (t is None or r.granted_at <= t)
                   for r in self.records)

    def copy(self) -> 'DcLedger':
        other = DcLedger(self.initiators, self.composites)
        other.records = list(self.records)
        other.denials = list(self.denials)
        return other

    def to_dict(self) -> dict:
        return {'initiators': dict(sorted(self.initiators.items())),
                'records': [r.to_dict() for r in self.records],
                'denials': list(self.denials)}


def holds_dc(ledger: DcLedger, holder: str, target: str, t: Optional[float] = None,
             _seen: Optional[Set[Tuple[str, str]]] = None) -> bool:
    """
    holder が target についてのDCを持つか

    複合系は、全ての部分系が target（または target の全ての部分系）についてのDCを持つときにDCを持つ。

    Args:
        ledger: DC台帳
        holder: 保持者
        target: 対象
        t: 時刻（省略時は全ての記録）
    """
    if holder == target:
        return False
    seen = _seen if _seen is not None else set()
    if (holder, target) in seen:
        return False
    seen.add((holder, target))
    if ledger.initiators.get(holder) == InitiatorKinds.A:
        return True
    if ledger.has_record(holder, target, t):
        return True
    parts = ledger.composites.get(holder)
    if parts and all(holds_dc(ledger, part, target, t, seen) for part in parts):
        return True
    target_parts = ledger.composites.get(target)
    if target_parts and all(holds_dc(ledger, holder, part, t, seen) for part in target_parts):
        return True
    return False


def _overlaps(e_xy: InteractionEntry, e_yz: InteractionEntry, touching_counts: bool) -> bool:
    if not e_xy.start < e_yz.start:
        return False
    if touching_counts:
        return e_yz.start <= e_xy.end
    return e_yz.start < e_xy.end


def endqt_grant_dc(schedule: InteractionSchedule, evidence: Mapping[InteractionEntry, ProcessClass],
                   ledger: DcLedger, layout: SpaceLayout,
                   pointers: Optional[Mapping[str, Observable]] = None,
                   touching_counts: bool = False,
                   tol: float = Tolerances.DISTURBANCE) -> DcLedger:
    """
    スケジュールからDCの付与を決める

    X–Y の相互作用 e_xy と Y–Z の相互作用 e_yz について、次の全てを満たすとき
    Y に Z についてのDCを与える（付与時刻は e_yz の開始）。
    - e_yz が e_xy の区間の内部で始まる
    - その時点で X が Y についてのDCを持つ
    - e_xy が準不可逆
    - e_yz のハミルトニアンが Y のポインタ観測量と可換（撹乱しない）

    Args:
        schedule: 相互作用スケジュール
        evidence: 各項目のデコヒーレンス分類
        ledger: 付与前の台帳
        layout: 全体のレイアウト
        pointers: 系ラベル → ポインタ観測量
        touching_counts: 終了と同時の開始も重なりとみなす
        tol: 非撹乱判定の許容誤差

    Returns:
        DcLedger: 付与後の台帳（元の台帳は変更しない）
    """
    result = ledger.copy()
    pointers = pointers or {}
    entries = list(schedule)
    denied: Dict[Tuple[str, str], str] = {}

    changed = True
    while changed:
        changed = False
        for e_xy in entries:
            x, y = e_xy.parties
            for e_yz in entries:
                if e_yz is e_xy or e_yz.parties[0] != y:
                    continue
                z = e_yz.parties[1]
                if z == y or result.has_record(y, z):
                    continue
                if not _overlaps(e_xy, e_yz, touching_counts):
                    denied.setdefault((y, z), f"{z} は {y}–{x} の相互作用中に始まっていません")
                    continue
                if not holds_dc(result, x, y, e_yz.start):
                    denied[(y, z)] = f"{x} は {y} についてのDCを持っていません"
                    continue
                process = evidence.get(e_xy)
                if process is None or not process.is_quasi_irreversible:
                    denied[(y, z)] = f"{x}–{y} の相互作用が準不可逆ではありません"
                    continue
                pointer = (pointers.get(y) or Observable.pauli_z(y)).lift(layout)
                passes, residual = commutativity_check(Observable(e_yz.hamiltonian(layout), layout), pointer, tol=tol)
                if not passes:
                    denied[(y, z)] = f"{z} が {y} のポインタを撹乱します (残差 {residual:.3g})"
                    continue
                record = DcRecord(y, z, e_yz.start, x)
                result.add(record)
                denied.pop((y, z), None)
                changed = True
                logger.info(f"DCを付与: {y} は {z} についてのDCを {x} から得ました (t={e_yz.start:g})")

    for (holder, target), reason in sorted(denied.items()):
        if not result.has_record(holder, target):
            result.denials.append({'holder': holder, 'target': target, 'reason': reason})
            logger.warning(f"DCの付与なし: {holder} -> {target}: {reason}")
    return result


def endqt_determinate_event(state: StateVector, holder: str, target: str, pointer_basis: Observable,
                            evidence: ProcessClass, rng: np.random.Generator, ledger: DcLedger,
                            graph: StructureGraph, t: float,
                            holder_pointer: Optional[Observable] = None,
                            locations: Optional[Mapping[str, Mapping[float, str]]] = None
                            ) -> Tuple[Optional[Dict[str, float]], StateVector, StructureGraph]:
    """
    決定値の発生

    holder が target についてのDCを持ち、相互作用が準不可逆なら、holder の記録因子と
    target のポインタの組をボルン則で引き、同じイベントで両方に値を与える。

    Returns:
        (記録因子と target の値（イベントがなければ None）, 状態, グラフ)
    """
    if not holds_dc(ledger, holder, target, t):
        logger.warning(f"イベントなし: {holder} は {target} についてのDCを持っていません (t={t:g})")
        return None, state, graph
    if not evidence.is_quasi_irreversible:
        logger.info(f"イベントなし: {holder}–{target} の相互作用は {evidence.kind} です")
        return None, state, graph

    rec = record_factor(state.layout, holder)
    if holder_pointer is None:
        holder_pointer = default_pointer(state, rec)
    components = joint_components(state, [rec, target], [holder_pointer, pointer_basis])
    index = sample_index(rng, [w for _, w, _ in components])
    (holder_value, target_value), _, conditioned = components[index]

    graph.ensure_node(holder)
    target_node = graph.ensure_node(target)
    if not target_node.is_generator:
        target_node.kind = NodeKinds.GENERATOR
    if resolve_destruction(graph, target, target_value, locations, t):
        graph.add_interaction(holder, target, EdgeKinds.SDI, t)
        graph.mark_determinate(target, t)
    graph.mark_determinate(holder, t)
    logger.info(f"決定値: {rec}={holder_value:g}, {target}={target_value:g} (t={t:g})")
    return {rec: holder_value, target: target_value}, conditioned, graph


def audit_ledger(ledger: DcLedger) -> List[str]:
    """
    全てのDC記録の付与の連鎖がイニシエータで終わるか確認

    Returns:
        問題点のリスト（空なら健全）
    """
    problems: List[str] = []
    memo: Dict[DcRecord, bool] = {}

    def grounded(record: DcRecord, stack: Set[DcRecord]) -> bool:
        if record in memo:
            return memo[record]
        if record in stack:
            return False
        stack = stack | {record}
        kind = ledger.initiators.get(record.via)
        if kind == InitiatorKinds.A:
            ok = True
        elif kind == InitiatorKinds.B and record.via == record.holder:
            ok = True
        else:
            parents = [r for r in ledger.records
                       if r.holder == record.via and r.target == record.holder and r.granted_at <= record.granted_at]
            ok = any(grounded(parent, stack) for parent in parents)
        memo[record] = ok
        return ok

    for record in ledger.records:
        if record.holder == record.target:
            problems.append(f"自分自身へのDC: {record.holder}")
        elif not grounded(record, set()):
            problems.append(f"イニシエータに辿り着かないDC: {record.holder} -> {record.target} (via {record.via})")
    return problems


class EnDqtEngine(TheoryEngine):
    """EnDQTエンジン"""

    engine_type = EngineTypes.ENDQT

    def __init__(self, params: Optional[EnDqtParams] = None):
        super().__init__(params=params or EnDqtParams())

    def prepare(self, ctx: RunContext) -> None:
        ledger = DcLedger(self.params.initiators, self.params.composites)
        systems = ctx.extra.get('systems', [])
        for label, kind in sorted(self.params.initiators.items()):
            if kind == InitiatorKinds.B:
                for target in systems:
                    if target != label:
                        ledger.add(DcRecord(label, target, 0.0, label))
        schedule: Optional[InteractionSchedule] = ctx.extra.get('schedule')
        if schedule is not None:
            ledger = endqt_grant_dc(schedule, ctx.extra.get('evidence', {}), ledger, ctx.state.layout,
                                    ctx.pointers, self.params.touching_counts, self.params.disturbance_tol)
        for label in self.params.initiators:
            if label in ctx.graph.nodes:
                ctx.graph.nodes[label].kind = NodeKinds.INITIATOR
        ctx.extra['ledger'] = ledger
        pending = [(r.granted_at, EventTypes.DC_GRANT, r.holder, r.to_dict())
                   for r in ledger.records if r.via != r.holder]
        ctx.extra['pending'] = sorted(pending, key=lambda item: (item[0], item[2]))
        for denial in ledger.denials:
            ctx.log.emit(0.0, EventTypes.DC_DENIED, denial['holder'], **denial)

    def advance(self, ctx: RunContext, t0: float, t1: float) -> None:
        # 付与はスケジュールから決まっているので、時刻が来たらログに出す
        pending = ctx.extra.get('pending', [])
        while pending and pending[0][0] <= t1 + 1e-12:
            t, event_type, system, data = pending.pop(0)
            ctx.log.emit(t, event_type, system, **data)

    def on_interaction_end(self, ctx: RunContext, entry: InteractionEntry, evidence: ProcessClass) -> None:
        self.advance(ctx, entry.end, entry.end)
        holder, target = entry.parties
        t = entry.end
        ledger: DcLedger = ctx.extra['ledger']
        values, state, graph = endqt_determinate_event(
            ctx.state, holder, target, ctx.pointer(target), evidence, ctx.rng, ledger, ctx.graph, t,
            holder_pointer=ctx.pointers.get(record_factor(ctx.state.layout, holder)),
            locations=ctx.extra.get('locations'))
        if values is None:
            reason = 'no DC' if not holds_dc(ledger, holder, target, t) else evidence.kind
            ctx.log.emit(t, EventTypes.NO_EVENT, target, holder=holder, reason=reason)
            return
        ctx.state = state
        ctx.graph = graph
        for label, value in values.items():
            ctx.values[(label, 'pointer')] = value
        ctx.log.emit(t, EventTypes.DETERMINATE, target, holder=holder,
                     values={k: values[k] for k in sorted(values)})

    def finish(self, ctx: RunContext) -> None:
        problems = audit_ledger(ctx.extra['ledger'])
        if problems:
            for problem in problems:
                logger.error(f"DC台帳の監査に失敗: {problem}")
            raise IntegrityError(f"DC台帳の監査に失敗しました: {problems[0]}", component='ledger', invariant='dc-chain')

    def describe(self) -> dict:
        return {'engine': self.engine_type, 'initiators': dict(sorted(self.params.initiators.items())),
                'touching_counts': self.params.touching_counts, 'env_qubits': self.params.env_qubits}
