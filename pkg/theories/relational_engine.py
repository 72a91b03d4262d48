"""
単一世界の関係主義エンジン

相互作用によって観測者に相対的な事実が生まれる。
- RQM: 全ての系が生成子で、全ての相互作用が事実を生む
- SingleWorld: 生成子として宣言された系だけが事実を生み、もつれた組をUDIで結ばない
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np

from constants import EdgeKinds, EngineTypes, EventTypes, RelationalVariants, Tolerances
from decomodels import InteractionEntry
from differentiation import ProcessClass
from exceptions import EngineError, ValidationError
from hilbert import Observable, StateVector, embed_operator

from .base_engine import RunContext, TheoryEngine, branch_components, default_pointer, sample_index

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RelativeFact:
    """観測者に相対的な事実"""
    observer: str
    observed: str
    prop: str
    value: float
    time: float
    via: Optional[str] = None

    def to_dict(self) -> dict:
        return {'observer': self.observer, 'observed': self.observed, 'property': self.prop,
                'value': self.value, 'time': self.time, 'via': self.via}


class RelationalTables:
    """観測者ごとの相対的な事実の表"""

    def __init__(self):
        self.facts: Dict[str, List[RelativeFact]] = {}

    def add(self, fact: RelativeFact) -> None:
        self.facts.setdefault(fact.observer, []).append(fact)

    def table(self, observer: str) -> Dict[Tuple[str, str], float]:
        """observer にとっての値（後の事実が優先）"""
        return {(f.observed, f.prop): f.value for f in self.facts.get(observer, [])}

    def facts_of(self, observer: str) -> List[RelativeFact]:
        return list(self.facts.get(observer, []))

    def relative_state(self, observer: str, state: StateVector,
                       pointers: Mapping[str, Observable]) -> StateVector:
        """
        observer の事実で条件付けた状態

        重みが0になる事実（後の時間発展と両立しない）は条件から外す。
        """
        vector = state.amplitudes
        for (observed, prop), value in self.table(observer).items():
            if prop != 'pointer':
                continue
            pointer = pointers.get(observed) or default_pointer(state, observed)
            projector = dict((round(v, 9), p) for v, p in pointer.projectors()).get(value)
            if projector is None:
                continue
            candidate = embed_operator(projector, [observed], state.layout) @ vector
            if np.linalg.norm(candidate) > Tolerances.ABSENT_AMPLITUDE:
                vector = candidate
        return StateVector(vector / np.linalg.norm(vector), state.layout, tol=Tolerances.COMPLETENESS)

    def snapshot(self) -> Dict[str, List[dict]]:
        return {observer: [f.to_dict() for f in facts] for observer, facts in sorted(self.facts.items())}


def relational_interact(observer: str, observed: str, pointer_basis: Observable, state: StateVector,
                        rng: np.random.Generator, variant: str, tables: RelationalTables,
                        t: float = 0.0, generators: Optional[Iterable[str]] = None,
                        process: Optional[ProcessClass] = None,
                        pointers: Optional[Mapping[str, Observable]] = None) -> Tuple[Optional[RelativeFact], RelationalTables]:
    """
    相互作用による相対的な事実の生成

    observer にとっての状態からボルン則で値を引き、observer の表にだけ記録する。
    デコヒーレンスが準不可逆なら、observed が持つ記録も observer に共有される。

    Args:
        observer: 観測する系
        observed: 観測される系
        pointer_basis: observed のポインタ観測量
        state: 全体の状態（射影しない）
        rng: 乱数生成器
        variant: RQM / SingleWorld
        tables: 相対的な事実の表
        t: 論理時刻
        generators: SingleWorld 変種での生成子
        process: 相互作用の分類
        pointers: 系ラベル → ポインタ観測量

    Returns:
        (事実（生まれなければ None）, 表)

    Raises:
        ValidationError: 自己相互作用の場合
    """
    if observer == observed:
        raise ValidationError(f"自分自身についての事実は作れません: {observer}", field='observer', value=observer)
    if variant not in RelationalVariants.get_all():
        raise ValidationError(f"未知の関係主義の変種です: {variant}", field='relational.variant', value=variant)
    if variant == RelationalVariants.SINGLE_WORLD and observer not in set(generators or ()):
        logger.info(f"事実なし: {observer} は生成子ではありません")
        return None, tables

    pointers = dict(pointers or {})
    pointers.setdefault(observed, pointer_basis)
    if process is not None and process.is_quasi_irreversible:
        own = tables.table(observer)
        for shared in tables.facts_of(observed):
            if shared.observed == observer:
                continue
            key = (shared.observed, shared.prop)
            if key in own and own[key] != shared.value:
                logger.warning(f"記録の共有で矛盾: {observer} の {key} は {own[key]} のまま")
                continue
            tables.add(RelativeFact(observer, shared.observed, shared.prop, shared.value, t, via=observed))

    relative = tables.relative_state(observer, state, pointers)
    components = branch_components(relative, observed, pointer_basis)
    index = sample_index(rng, [w for _, w, _ in components])
    value = components[index][0]
    fact = RelativeFact(observer, observed, 'pointer', value, t)
    tables.add(fact)
    logger.debug(f"相対的な事実: {observer} にとって {observed}={value:g} (t={t:g})")
    return fact, tables


class RelationalEngine(TheoryEngine):
    """単一世界の関係主義エンジン"""

    engine_type = EngineTypes.RELATIONAL

    def __init__(self, variant: str = RelationalVariants.RQM, generators: Optional[Iterable[str]] = None):
        if variant not in RelationalVariants.get_all():
            raise EngineError(f"未知の関係主義の変種です: {variant}", engine=self.engine_type, operation='init')
        super().__init__(variant=variant)
        self.generators = set(generators or ())

    def prepare(self, ctx: RunContext) -> None:
        ctx.extra['tables'] = RelationalTables()

    def link_entangled(self, ctx: RunContext, a: str, b: str, t: float) -> None:
        if self.variant == RelationalVariants.SINGLE_WORLD:
            return
        super().link_entangled(ctx, a, b, t)

    def on_interaction_end(self, ctx: RunContext, entry: InteractionEntry, evidence: ProcessClass) -> None:
        observer, observed = entry.parties
        t = entry.end
        tables: RelationalTables = ctx.extra['tables']
        fact, _ = relational_interact(observer, observed, ctx.pointer(observed), ctx.state, ctx.rng,
                                      self.variant, tables, t=t, generators=self.generators,
                                      process=evidence, pointers=ctx.pointers)
        if fact is None:
            ctx.log.emit(t, EventTypes.NO_EVENT, observed, observer=observer, reason='not a generator')
            return
        ctx.graph.ensure_node(observer)
        ctx.graph.ensure_node(observed)
        if ctx.graph.has_potential_destruction(observed):
            # 相対的な事実は場所の破壊を起こさない
            logger.debug(f"潜在的破壊を持つ系なのでSDIを張りません: {observed}")
        else:
            ctx.graph.add_interaction(observer, observed, EdgeKinds.SDI, t)
        ctx.values[(observed, 'pointer')] = fact.value
        ctx.log.emit(t, EventTypes.RELATIVE_FACT, observed, **fact.to_dict())

    def describe(self) -> dict:
        return {'engine': self.engine_type, 'variant': self.variant, 'generators': sorted(self.generators)}
