"""
多世界解釈（MWI）エンジン

準不可逆なデコヒーレンスでポインタ成分ごとに世界が分岐する。
- QuasiLocal: 離れた相手にも各世界で値が定まる
- Local: 分岐は局所的で、離れた相手は未分化のまま（出会ったときに対応が決まる）
- Global: 同じ世界の全ての系を SDI で結び、離れた系も即座に分岐させる
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from constants import EdgeKinds, EngineTypes, EventTypes, MwiVariants, Tolerances
from decomodels import InteractionEntry
from differentiation import ProcessClass
from exceptions import EngineError, IntegrityError, ValidationError
from hilbert import Observable, StateVector, embed_operator
from structures import StructureGraph

from .base_engine import (
    RunContext, TheoryEngine, branch_components, correlated_factors,
    default_pointer, definite_value, resolve_destruction, sample_index,
)

logger = logging.getLogger(__name__)

Values = Dict[Tuple[str, str], float]


@dataclass
class World:
    """一つの世界"""
    weight: float
    state: StateVector
    values: Values = field(default_factory=dict)
    graph: StructureGraph = field(default_factory=StructureGraph)
    label: str = ''
    split: Tuple[str, ...] = ()

    def value(self, system: str, prop: str = 'pointer') -> Optional[float]:
        return self.values.get((system, prop))


class WorldSet:
    """重み付きの世界の集合（重みの和は1）"""

    def __init__(self, worlds: Sequence[World], wing: Optional[str] = None):
        if not worlds:
            raise ValidationError("世界が一つもありません", field='worlds')
        weights = [w.weight for w in worlds]
        if min(weights) < 0:
            raise ValidationError("世界の重みが負です", field='weights', value=weights)
        total = sum(weights)
        if abs(total - 1.0) > Tolerances.COMPLETENESS:
            raise IntegrityError(f"世界の重みの和が1ではありません: {total}", component='worlds', invariant='weight-sum')
        self.worlds: List[World] = list(worlds)
        self.wing = wing

    @classmethod
    def single(cls, state: StateVector, values: Optional[Values] = None,
               graph: Optional[StructureGraph] = None) -> 'WorldSet':
        return cls([World(1.0, state, dict(values or {}), graph if graph is not None else StructureGraph())])

    def __len__(self) -> int:
        return len(self.worlds)

    def __iter__(self):
        return iter(self.worlds)

    def weights(self) -> List[float]:
        return [w.weight for w in self.worlds]

    def total_weight(self) -> float:
        return float(sum(self.weights()))

    def summary(self) -> List[dict]:
        return [{'label': w.label, 'weight': round(w.weight, 12),
                 'values': {f"{s}.{p}": v for (s, p), v in sorted(w.values.items())}} for w in self.worlds]


def mwi_branch(state: StateVector, system: str, pointer_basis: Observable, variant: str,
               graph: StructureGraph, t: float = 0.0, process: Optional[ProcessClass] = None,
               observer: Optional[str] = None, values: Optional[Values] = None,
               pointers: Optional[Mapping[str, Observable]] = None,
               locations: Optional[Mapping[str, Mapping[float, str]]] = None) -> WorldSet:
    """
    ポインタ成分ごとの世界への分岐

    Args:
        state: 分岐前の状態
        system: 分化する系
        pointer_basis: その系のポインタ観測量
        variant: QuasiLocal / Local / Global
        graph: 分岐前のグラフ（各世界はそのコピーを持つ）
        t: 論理時刻
        process: 引き金となった相互作用の分類（準不可逆でなければ分岐しない）
        observer: 測定した系（SDI の始点）
        values: 分岐前に確定している値
        pointers: 系ラベル → ポインタ観測量
        locations: 系ラベル → {ポインタ値: 場所タグ}（潜在的破壊は世界ごとに昇格する）

    Returns:
        WorldSet: 重み |α_i|² の世界（1e-12 未満は刈り込み）
    """
    if variant not in MwiVariants.get_all():
        raise ValidationError(f"未知のMWI変種です: {variant}", field='mwi.variant', value=variant)
    values = dict(values or {})
    pointers = pointers or {}
    if process is None or not process.is_quasi_irreversible:
        reason = 'no evidence' if process is None else process.kind
        logger.info(f"分岐なし: {system} の過程が準不可逆ではありません ({reason})")
        return WorldSet.single(state, values, graph.snapshot())

    components = branch_components(state, system, pointer_basis)
    total = sum(weight for _, weight, _ in components)
    partners = [p for p in correlated_factors(state, system)
                if p != observer and (not graph.nodes or p in graph.nodes)]

    worlds = []
    for value, weight, projected in components:
        world_graph = graph.snapshot()
        world_values = dict(values)
        world_values[(system, 'pointer')] = value
        settled = resolve_destruction(world_graph, system, value, locations, t)
        if settled and observer is not None:
            world_graph.ensure_node(observer)
            world_graph.add_interaction(observer, system, EdgeKinds.SDI, t)
        if settled:
            world_graph.mark_determinate(system, t)
        split: Tuple[str, ...] = (system,)

        if variant == MwiVariants.LOCAL:
            world_state = state
        else:
            world_state = projected
            for partner in partners:
                pointer = pointers.get(partner) or default_pointer(projected, partner)
                partner_value = definite_value(projected, partner, pointer)
                if partner_value is None or not resolve_destruction(world_graph, partner, partner_value, locations, t):
                    continue
                world_values[(partner, 'pointer')] = partner_value
                world_graph.add_interaction(system, partner, EdgeKinds.SDI, t)
                world_graph.mark_determinate(partner, t)
            if variant == MwiVariants.GLOBAL:
                for other in sorted(world_graph.nodes):
                    if other in (system, observer) or world_graph.has_potential_destruction(other):
                        continue
                    if not any(e.kind == EdgeKinds.SDI and {e.source, e.target} == {system, other}
                               for e in world_graph.live_edges()):
                        world_graph.add_interaction(system, other, EdgeKinds.SDI, t)
                split = tuple(sorted(world_graph.nodes))
        worlds.append(World(weight / total, world_state, world_values, world_graph, f"{system}={value:g}", split))

    logger.info(f"分岐: {system} ({variant}) -> {len(worlds)} 世界 {[round(w.weight, 6) for w in worlds]}")
    return WorldSet(worlds, wing=observer or system)


def pair_local_worlds(first: WorldSet, second: WorldSet) -> List[Tuple[World, World, float]]:
    """出会う前の両翼の世界の組（重みは積）"""
    return [(a, b, a.weight * b.weight) for a in first for b in second]


def meet_local_worlds(first: WorldSet, second: WorldSet, state: StateVector,
                      pointers: Mapping[str, Observable]) -> List[Tuple[World, World, float]]:
    """
    両翼が出会ったときに対応する世界の組

    各組の重みは両翼の値への同時射影のボルン重み。重み 1e-12 未満の組は矛盾として除く。

    Args:
        first: 一方の翼の世界
        second: 他方の翼の世界
        state: 分岐していない全体の状態
        pointers: 系ラベル → ポインタ観測量
    """
    pairs = []
    for a in first:
        for b in second:
            vector = state.amplitudes
            for world in (a, b):
                for (system, prop), value in world.values.items():
                    if prop != 'pointer' or system not in pointers:
                        continue
                    projector = dict((round(v, 9), p) for v, p in pointers[system].projectors()).get(value)
                    if projector is None:
                        continue
                    vector = embed_operator(projector, [system], state.layout) @ vector
            weight = float(np.real(np.vdot(vector, vector)))
            if weight > Tolerances.WORLD_PRUNE:
                pairs.append((a, b, weight))
    total = sum(w for _, _, w in pairs)
    return [(a, b, w / total) for a, b, w in pairs]


class MwiEngine(TheoryEngine):
    """MWI分岐エンジン"""

    engine_type = EngineTypes.MWI

    def __init__(self, variant: str = MwiVariants.QUASI_LOCAL):
        if variant not in MwiVariants.get_all():
            raise EngineError(f"未知のMWI変種です: {variant}", engine=self.engine_type, operation='init')
        super().__init__(variant=variant)

    def prepare(self, ctx: RunContext) -> None:
        ctx.extra['worlds'] = WorldSet.single(ctx.state, ctx.values, ctx.graph)
        ctx.extra['followed'] = 0
        ctx.extra['wings'] = {}
        ctx.extra['followed_state'] = ctx.state

    def on_interaction_end(self, ctx: RunContext, entry: InteractionEntry, evidence: ProcessClass) -> None:
        observer, system = entry.parties
        pointer = ctx.pointer(system)
        t = entry.end
        if not evidence.is_quasi_irreversible:
            ctx.log.emit(t, EventTypes.NO_EVENT, system, observer=observer, reason=evidence.kind)
            return
        if self.variant == MwiVariants.LOCAL:
            self._branch_local(ctx, observer, system, pointer, evidence, t)
        else:
            self._branch_global(ctx, observer, system, pointer, evidence, t)

    def _branch_local(self, ctx: RunContext, observer: str, system: str, pointer: Observable,
                      evidence: ProcessClass, t: float) -> None:
        # 全体の状態は射影しない。たどる世界は既にたどった値と整合するボルン重みで選ぶ
        wing = mwi_branch(ctx.state, system, pointer, self.variant, ctx.graph, t, evidence,
                          observer, ctx.values, ctx.pointers, ctx.extra.get('locations'))
        ctx.extra['wings'][observer] = wing
        followed_state = ctx.extra['followed_state']
        components = branch_components(followed_state, system, pointer)
        index = sample_index(ctx.rng, [w for _, w, _ in components])
        value, _, projected = components[index]
        ctx.extra['followed_state'] = projected
        chosen = next(w for w in wing if w.value(system) == value)
        ctx.graph = chosen.graph
        ctx.values[(system, 'pointer')] = value
        ctx.log.emit(t, EventTypes.BRANCH, system, observer=observer, variant=self.variant,
                     worlds=wing.summary(), followed=chosen.label)

    def _branch_global(self, ctx: RunContext, observer: str, system: str, pointer: Observable,
                       evidence: ProcessClass, t: float) -> None:
        current: WorldSet = ctx.extra['worlds']
        followed: int = ctx.extra['followed']
        refined: List[World] = []
        children: List[int] = []
        for index, world in enumerate(current):
            sub = mwi_branch(world.state, system, pointer, self.variant, world.graph, t, evidence,
                             observer, world.values, ctx.pointers, ctx.extra.get('locations'))
            for child in sub:
                if index == followed:
                    children.append(len(refined))
                label = f"{world.label},{child.label}" if world.label else child.label
                refined.append(World(world.weight * child.weight, child.state, child.values, child.graph,
                                     label, child.split))
        worlds = WorldSet(refined)
        pick = children[sample_index(ctx.rng, [refined[i].weight for i in children])]
        ctx.extra['worlds'] = worlds
        ctx.extra['followed'] = pick
        chosen = refined[pick]
        ctx.state = chosen.state
        ctx.graph = chosen.graph
        ctx.values.update(chosen.values)
        ctx.log.emit(t, EventTypes.BRANCH, system, observer=observer, variant=self.variant,
                     worlds=worlds.summary(), followed=chosen.label)

    def world_count(self, ctx: RunContext) -> int:
        """世界（Local では翼ごとの組）の数"""
        if self.variant == MwiVariants.LOCAL:
            count = 1
            for wing in ctx.extra.get('wings', {}).values():
                count *= len(wing)
            return count
        return len(ctx.extra.get('worlds', ()))
