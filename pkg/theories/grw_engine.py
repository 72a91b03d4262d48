"""
GRW自発的収縮エンジン

生成子（位置を持つ因子）は単位時間あたり確率 λ で局在化する。
局在化の中心はボルン則で選ばれ、状態にガウス関数を掛けて規格化し直す。
"""

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from constants import DefaultValues, EdgeKinds, EngineTypes, EventTypes, Tolerances
from decomodels import InteractionEntry
from differentiation import ProcessClass
from exceptions import IntegrityError, ValidationError
from hilbert import StateVector, embed_operator, mutual_information, partial_trace
from structures import StructureGraph

from .base_engine import RunContext, TheoryEngine, branch_components, default_pointer, resolve_destruction

logger = logging.getLogger(__name__)


class GrwParams:
    """GRWのパラメータ"""

    def __init__(self, lam: float = DefaultValues.GRW_LAMBDA, sigma: float = DefaultValues.GRW_SIGMA,
                 amplification: Optional[Mapping[str, float]] = None, spacing: float = 1.0):
        """
        Args:
            lam: 生成子あたりの収縮率（> 0）
            sigma: 局在化の幅（格子単位）
            amplification: 生成子ラベル → 粒子数（収縮率の倍率）
            spacing: 格子間隔
        """
        if not math.isfinite(lam) or lam <= 0:
            raise ValidationError("grw.lambda must be > 0", field='grw.lambda', value=lam)
        if not math.isfinite(sigma) or sigma <= 0:
            raise ValidationError("grw.sigma must be > 0", field='grw.sigma', value=sigma)
        if spacing <= 0:
            raise ValidationError("grw.spacing must be > 0", field='grw.spacing', value=spacing)
        self.lam = float(lam)
        self.sigma = float(sigma)
        self.amplification: Dict[str, float] = dict(amplification or {})
        for label, count in self.amplification.items():
            if count < 0:
                raise ValidationError(f"粒子数は非負でなければなりません: {label}", field='grw.amplification', value=count)
        self.spacing = float(spacing)

    def rate(self, label: str) -> float:
        return self.lam * self.amplification.get(label, 1.0)

    def __repr__(self) -> str:
        return f"GrwParams(lambda={self.lam:g}, sigma={self.sigma:g})"


@dataclass(frozen=True)
class CollapseEvent:
    """収縮イベント"""
    system: str
    center: int
    time: float
    dominant_probability: float


def _collapse(state: StateVector, label: str, center: int, params: GrwParams) -> Tuple[StateVector, float]:
    dim = state.layout.dim_of(label)
    positions = np.arange(dim) * params.spacing
    gaussian = np.exp(-((positions - center * params.spacing) ** 2) / (4 * params.sigma ** 2))
    vector = embed_operator(np.diag(gaussian).astype(complex), [label], state.layout) @ state.amplitudes
    norm = np.linalg.norm(vector)
    if norm < Tolerances.ABSENT_AMPLITUDE:
        raise IntegrityError(f"収縮後のノルムが0になりました: {label}", component=label, invariant='grw-norm')
    collapsed = StateVector(vector / norm, state.layout, tol=Tolerances.COMPLETENESS)
    dominant = float(partial_trace(collapsed.to_density(), {label}).populations()[center])
    return collapsed, dominant


def grw_step(state: StateVector, generators: Mapping[str, float], dt: float, rng: np.random.Generator,
             params: GrwParams, t: float = 0.0) -> Tuple[StateVector, List[CollapseEvent]]:
    """
    1ステップ (t, t+dt] の自発的収縮

    各生成子の収縮回数はポアソン分布 Poisson(rate·dt) に従う（少なくとも1回起こる確率は 1 − exp(−rate·dt)）。

    Args:
        state: 現在の状態
        generators: 生成子ラベル → 粒子数（収縮率の倍率）
        dt: ステップ幅（> 0）
        rng: 乱数生成器
        params: GRWパラメータ
        t: ステップ開始時刻

    Returns:
        (新しい状態, 収縮イベントのリスト)
    """
    if not dt > 0:
        raise ValidationError("dt は正でなければなりません", field='dt', value=dt)
    events: List[CollapseEvent] = []
    for label in sorted(generators):
        rate = params.lam * generators[label]
        count = int(rng.poisson(rate * dt)) if rate > 0 else 0
        for _ in range(count):
            weights = partial_trace(state.to_density(), {label}).populations()
            center = int(rng.choice(len(weights), p=weights / weights.sum()))
            state, dominant = _collapse(state, label, center, params)
            event = CollapseEvent(label, center, t + dt, dominant)
            events.append(event)
            logger.debug(f"GRW収縮: {label} 中心={center}, 支配確率={dominant:.6f}")
    return state, events


def grw_collapse_propagate(state: StateVector, collapsed: str, graph: StructureGraph, t: float,
                           prior: Optional[StateVector] = None,
                           locations: Optional[Mapping[str, Mapping[float, str]]] = None,
                           pointers: Optional[Mapping] = None) -> Tuple[StateVector, StructureGraph, Dict[str, float]]:
    """
    収縮の相関を通じた伝播

    収縮前の状態で相関している因子を幅優先でたどり、SDI を張って収縮DSに取り込む。
    ポインタ値の確率が 0.99 を超えた因子に値を割り当て、潜在的破壊の自己辺があれば昇格する。

    Args:
        state: 収縮後の状態
        collapsed: 収縮した生成子
        graph: 相互作用グラフ
        t: 論理時刻
        prior: 収縮前の状態（相関の検出に使う）
        locations: 系ラベル → {ポインタ値: 場所タグ}
        pointers: 系ラベル → ポインタ観測量

    Returns:
        (状態, グラフ, 系ラベル → 割り当てた値)
    """
    reference = prior if prior is not None else state
    locations = locations or {}
    pointers = pointers or {}
    rho = reference.to_density()
    labels = reference.layout.labels
    if graph.nodes:
        # 記録因子などグラフに現れない因子はたどらない
        labels = [label for label in labels if label in graph.nodes or label == collapsed]
    assigned: Dict[str, float] = {}

    def pointer_of(label: str):
        return pointers.get(label) or default_pointer(state, label)

    def settle(label: str) -> bool:
        # 支配的な値があれば割り当て、潜在的破壊を昇格する
        components = branch_components(state, label, pointer_of(label), prune=Tolerances.WORLD_PRUNE)
        value, weight = max(((v, w) for v, w, _ in components), key=lambda item: item[1])
        if weight <= Tolerances.DOMINANT_SITE:
            logger.warning(f"支配的な値がないため割り当てを見送り: {label} (p={weight:.4f})")
            return False
        if not resolve_destruction(graph, label, value, locations, t):
            return False
        assigned[label] = value
        return True

    if not settle(collapsed):
        return state, graph, assigned

    visited = {collapsed}
    queue = deque([collapsed])
    while queue:
        current = queue.popleft()
        for other in labels:
            if other in visited:
                continue
            if mutual_information(rho, current, other) <= 1e-9:
                continue
            visited.add(other)
            if settle(other):
                graph.ensure_node(current)
                graph.add_interaction(current, other, EdgeKinds.SDI, t)
                queue.append(other)
    for label in assigned:
        graph.mark_determinate(label, t)
    logger.info(f"収縮DSを形成: {collapsed} -> {sorted(assigned)} (t={t:g})")
    return state, graph, assigned


class GrwEngine(TheoryEngine):
    """GRW自発的収縮エンジン"""

    engine_type = EngineTypes.GRW

    def __init__(self, params: Optional[GrwParams] = None):
        super().__init__(params=params or GrwParams())

    def generators(self, ctx: RunContext) -> Dict[str, float]:
        """生成子 → 粒子数（シナリオが ctx.extra['generators'] で宣言）"""
        declared = ctx.extra.get('generators') or list(self.params.amplification)
        return {label: self.params.amplification.get(label, 1.0) for label in declared}

    def advance(self, ctx: RunContext, t0: float, t1: float) -> None:
        prior = ctx.state
        state, events = grw_step(ctx.state, self.generators(ctx), t1 - t0, ctx.rng, self.params, t=t0)
        ctx.state = state
        for event in events:
            ctx.log.emit(event.time, EventTypes.COLLAPSE, event.system,
                         center=event.center, dominant_probability=round(event.dominant_probability, 12))
            before = ctx.graph.location_count()
            ctx.state, ctx.graph, assigned = grw_collapse_propagate(
                ctx.state, event.system, ctx.graph, event.time, prior=prior,
                locations=ctx.extra.get('locations'), pointers=ctx.pointers)
            if ctx.graph.location_count() < before:
                ctx.log.emit(event.time, EventTypes.DESTRUCTION, event.system,
                             destroyed=before - ctx.graph.location_count())
            for label, value in assigned.items():
                ctx.assign(label, value, event.time)
                ctx.log.emit(event.time, EventTypes.DETERMINATE, label, value=value, cause=event.system)
            prior = ctx.state

    def on_interaction_end(self, ctx: RunContext, entry: InteractionEntry, evidence: ProcessClass) -> None:
        # GRWでは相互作用の終了そのものは値を生まない
        ctx.log.emit(entry.end, EventTypes.INTERACTION_END, entry.parties[1],
                     parties=list(entry.parties), process=evidence.kind)

    def describe(self) -> dict:
        return {'engine': self.engine_type, 'lambda': self.params.lam, 'sigma': self.params.sigma,
                'amplification': dict(sorted(self.params.amplification.items()))}
