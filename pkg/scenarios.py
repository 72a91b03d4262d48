"""
生成的量子論シミュレータ - シナリオ

このモジュールは以下を提供します：
- 4つの標準シナリオ（シュテルン＝ゲルラッハ干渉計・EPR/ベル・安定決定連鎖・弱測定スイープ）
- 任意の理論エンジンでの実行（試行ごとに分割したシード）
- 設定ファイルの読み込み（全てのエラーを集めて報告）
- ベル統計・無信号性の検査・不変条件の検証スイート
"""

import configparser
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from causal import (
    QuantumCausalModel, chsh, chsh_from_correlators, classical_chsh_bound, correlator,
    factorizability_check, random_factorizable_mixture, singlet_state, table_correlators,
)
from constants import (
    DefaultValues, EdgeKinds, EngineTypes, EventTypes, FilePaths, HamiltonianTags, InitiatorKinds,
    MwiVariants, NodeKinds, OutputFormats, RelationalVariants, SamplingModes, ScenarioNames, Tolerances,
    VerifySuites,
)
from decomodels import (
    InteractionEntry, InteractionSchedule, SpinEnvironment, dephasing_evidence, evolve_segment,
    run_schedule, spin_env_evolve,
)
from differentiation import (
    DifferentiationReport, ProcessClass, classify_process, degree_of_differentiation,
    differentiation_report, environment_overlaps,
)
from event_log import EventLog, OutputBundle, rows_to_csv, rows_to_json, to_json
from exceptions import ConfigError, EngineError, IntegrityError, StructureError, ValidationError
from gqttypes import RunSummary, SweepRow
from hilbert import DensityOperator, Observable, SpaceLayout, StateVector, partial_trace, tensor
from structures import StructureGraph
from theories import EnDqtEngine, MwiEngine, RelationalEngine, RunContext, TheoryEngine, create_engine
from theories.base_engine import joint_components
from utils.cache import PropagatorCache
from utils.random_source import RandomSource, trial_sources

logger = logging.getLogger(__name__)

# GRW の生成子の既定の粒子数（収縮率の倍率）
DEFAULT_AMPLIFICATION = 20.0
# 最後の相互作用の後に確率過程を走らせる時間
GRACE_TIME = 1.0


class Scenario:
    """実行可能なシナリオ"""

    def __init__(self, name: str, parameters: Mapping[str, Any], layout: SpaceLayout,
                 schedule: InteractionSchedule, initial: Callable[[], StateVector],
                 systems: Sequence[str], measured: Sequence[str],
                 pointers: Optional[Mapping[str, Observable]] = None,
                 generators: Optional[Mapping[str, float]] = None,
                 initiators: Optional[Mapping[str, str]] = None,
                 locations: Optional[Mapping[str, Mapping[float, str]]] = None,
                 potentials: Sequence[str] = (),
                 entangled: Sequence[Tuple[str, str]] = (),
                 environment_sizes: Optional[Mapping[Tuple[str, str], int]] = None,
                 t_end: Optional[float] = None,
                 dt: float = DefaultValues.DT,
                 self_hamiltonians: Optional[Mapping[str, np.ndarray]] = None):
        """
        Args:
            name: シナリオ名
            parameters: シナリオのパラメータ
            layout: 全体のレイアウト
            schedule: 相互作用スケジュール
            initial: 初期状態を作る関数
            systems: グラフのノードになる系（記録因子は含めない）
            measured: 結果を集計する系
            pointers: 系ラベル → ポインタ観測量
            generators: GRW の生成子 → 粒子数
            initiators: EnDQT の既定のイニシエータ
            locations: 系ラベル → {ポインタ値: 場所タグ}
            potentials: t=0 で潜在的破壊の自己辺を持つ系
            entangled: t=0 でもつれている組
            environment_sizes: 当事者の組 → デコヒーレンスの根拠に使う環境の大きさ（省略時は既定値）
            t_end: 終了時刻（省略時はスケジュールの最終終了時刻）
            dt: 確率過程のステップ幅
            self_hamiltonians: 因子ラベル → 局所ハミルトニアン
        """
        self.name = name
        self.parameters = dict(parameters)
        self.layout = layout
        self.schedule = schedule
        self._initial = initial
        self.systems = list(systems)
        self.measured = list(measured)
        self.pointers: Dict[str, Observable] = dict(pointers or {})
        self.generators: Dict[str, float] = dict(generators or {})
        self.initiators: Dict[str, str] = dict(initiators or {})
        self.locations: Dict[str, Dict[float, str]] = {k: dict(v) for k, v in (locations or {}).items()}
        self.potentials = list(potentials)
        self.entangled = [tuple(pair) for pair in entangled]
        self.environment_sizes = dict(environment_sizes or {})
        self.t_end = schedule.end_time if t_end is None else float(t_end)
        self.dt = dt
        self.self_hamiltonians = dict(self_hamiltonians or {})
        # 既定では電荷・質量のような性質も不決定から始める
        self.differentiated: List[str] = []
        self.validate()

    def validate(self) -> None:
        """
        宣言の整合性を確認

        Raises:
            ScheduleError: スケジュールが未宣言の系を参照する場合
            ValidationError: その他の宣言が不正な場合
        """
        self.schedule.validate_layout(self.layout)
        declared = set(self.layout.labels)
        for group, labels in (('systems', self.systems), ('measured', self.measured),
                              ('generators', list(self.generators)), ('potentials', self.potentials)):
            for label in labels:
                if label not in declared:
                    raise ValidationError(f"未宣言の系です: {group}.{label}", field=group, value=label)
        for label in self.potentials:
            if len(self.locations.get(label, {})) < 2:
                raise ValidationError(f"潜在的破壊には場所タグが2つ以上必要です: {label}", field='locations', value=label)
        if not self.dt > 0:
            raise ValidationError("dt は正でなければなりません", field='dt', value=self.dt)
        if self.t_end < self.schedule.end_time:
            raise ValidationError("終了時刻がスケジュールより前です", field='t_end', value=self.t_end)

    def mark_differentiated(self, labels: Iterable[str]) -> None:
        """
        t=0 で安定に分化している系を指定

        Raises:
            ValidationError: グラフのノードでない系の場合
        """
        labels = list(labels)
        for label in labels:
            if label not in self.systems:
                raise ValidationError(f"未宣言の系です: differentiated.{label}", field='differentiated', value=label)
        self.differentiated = labels

    def initial_state(self) -> StateVector:
        state = self._initial()
        if state.layout != self.layout:
            raise ValidationError("初期状態のレイアウトが宣言と一致しません", field='initial', value=state.layout.labels)
        return state

    def initial_graph(self) -> StructureGraph:
        """t=0 の相互作用グラフ（系ノード・潜在的破壊の自己辺・初めから分化している系）"""
        graph = StructureGraph()
        for label in self.systems:
            kind = NodeKinds.GENERATOR if label in self.generators else NodeKinds.NON_GENERATOR
            graph.add_node(label, kind=kind, locations=self.locations.get(label, {}).values())
        for label in self.potentials:
            graph.add_interaction(label, label, EdgeKinds.POTENTIAL_DESTRUCTION, 0.0)
        for label in self.differentiated:
            graph.mark_determinate(label, 0.0)
        return graph

    def environment_size(self, entry: InteractionEntry, default: int) -> int:
        return int(self.environment_sizes.get(tuple(entry.parties), default))

    def __repr__(self) -> str:
        return f"Scenario({self.name}, entries={len(self.schedule)}, t_end={self.t_end:g})"


def _product_state(*factors: StateVector) -> StateVector:
    state = factors[0]
    for factor in factors[1:]:
        state = tensor(state, factor)
    return state


def stern_gerlach(theta: float = math.pi / 2, detector: bool = True, recombine: bool = False,
                  dt: float = DefaultValues.DT) -> Scenario:
    """
    シュテルン＝ゲルラッハ干渉計

    スピン S が経路 P（上 +1 / 下 −1）に記録され、下側の腕の検出器 D が経路を記録する。
    recombine では経路を再結合してスピンのコヒーレンスを戻す。

    Args:
        theta: スピンの極角（ラジアン）。cos(θ/2)|↑⟩ + sin(θ/2)|↓⟩
        detector: 下側の腕に検出器を置くか
        recombine: 検出の後に経路を再結合するか
    """
    layout = SpaceLayout.qubits('S', 'P', 'D')
    entries = [InteractionEntry(0.0, 1.0, ('P', 'S'), HamiltonianTags.RECORD)]
    if detector:
        entries.append(InteractionEntry(1.0, 2.0, ('D', 'P'), HamiltonianTags.RECORD))
    if recombine:
        entries.append(InteractionEntry(2.0, 3.0, ('P', 'S'), HamiltonianTags.RECORD))
    schedule = InteractionSchedule(entries)

    def initial() -> StateVector:
        return _product_state(StateVector.qubit('S', math.cos(theta / 2), math.sin(theta / 2)),
                              StateVector.qubit('P', 1, 0), StateVector.qubit('D', 1, 0))

    return Scenario(
        ScenarioNames.STERN_GERLACH, {'theta': theta, 'detector': detector, 'recombine': recombine},
        layout, schedule, initial,
        systems=['S', 'P', 'D'], measured=['P'],
        generators={'D': DEFAULT_AMPLIFICATION},
        initiators={'D': InitiatorKinds.A},
        locations={'P': {1.0: 'up', -1.0: 'down'}},
        potentials=['P'],
        environment_sizes={('P', 'S'): 1},
        t_end=schedule.end_time + GRACE_TIME, dt=dt)


def epr_bell(angle_a: float = 0.0, angle_b: float = 0.0, sign: int = -1,
             dt: float = DefaultValues.DT) -> Scenario:
    """
    EPR/ベル実験

    A, B は (|01⟩ + sign·|10⟩)/√2 にあり、Alice と Bob が同時刻にそれぞれの角度で記録する。

    Args:
        angle_a: Alice の測定角（ラジアン）
        angle_b: Bob の測定角（ラジアン）
        sign: もつれ状態の相対位相（−1 が一重項）
    """
    layout = SpaceLayout.qubits('A', 'B', 'Alice', 'Bob')
    schedule = InteractionSchedule([
        InteractionEntry(1.0, 2.0, ('Alice', 'A'), HamiltonianTags.RECORD, angle=angle_a),
        InteractionEntry(1.0, 2.0, ('Bob', 'B'), HamiltonianTags.RECORD, angle=angle_b),
    ])
    pair = singlet_state(sign)

    def initial() -> StateVector:
        return _product_state(pair, StateVector.qubit('Alice', 1, 0), StateVector.qubit('Bob', 1, 0))

    return Scenario(
        ScenarioNames.EPR_BELL, {'angle_a': angle_a, 'angle_b': angle_b, 'sign': sign},
        layout, schedule, initial,
        systems=['A', 'B', 'Alice', 'Bob'], measured=['A', 'B'],
        pointers={'A': Observable.spin_along('A', angle_a), 'B': Observable.spin_along('B', angle_b)},
        generators={'Alice': DEFAULT_AMPLIFICATION, 'Bob': DEFAULT_AMPLIFICATION},
        initiators={'Alice': InitiatorKinds.A, 'Bob': InitiatorKinds.A},
        entangled=[('A', 'B')],
        t_end=schedule.end_time + GRACE_TIME, dt=dt)


def sdc_chain(permuted: bool = False, disturb: bool = False, s2_start: float = 0.8,
              orthogonal: bool = True, dt: float = DefaultValues.DT) -> Scenario:
    """
    安定決定連鎖 S0 → S1 → S2

    S0–S1 が [0, 1] で相互作用し、その途中で S1 の記録因子が S2 と相互作用を始める。

    Args:
        permuted: S2 の相互作用を S0–S1 の終了後に始める
        disturb: S1–S2 の相互作用を S1 のポインタを撹乱するものにする
        s2_start: S1–S2 の開始時刻
        orthogonal: 記録を完全（環境の終状態が直交）にする
    """
    start = 1.2 if permuted else s2_start
    if not 0.0 <= start:
        raise ValidationError("s2_start は非負でなければなりません", field='s2_start', value=start)
    duration = 1.2
    first_strength = None if orthogonal else math.pi / 4
    second_strength = None if orthogonal else math.pi / (4 * duration)
    second_tag = HamiltonianTags.DISTURB if disturb else HamiltonianTags.RECORD
    if disturb:
        second_strength = math.pi / (2 * duration)
    layout = SpaceLayout.qubits('S0', 'S1', 'S1.rec', 'S2')
    schedule = InteractionSchedule([
        InteractionEntry(0.0, 1.0, ('S0', 'S1'), HamiltonianTags.RECORD, strength=first_strength),
        InteractionEntry(start, start + duration, ('S1', 'S2'), second_tag, strength=second_strength),
    ])
    plus = 1 / math.sqrt(2)

    def initial() -> StateVector:
        return _product_state(StateVector.qubit('S0', 1, 0), StateVector.qubit('S1', plus, plus),
                              StateVector.qubit('S1.rec', 1, 0), StateVector.qubit('S2', plus, plus))

    sizes = {} if orthogonal else {('S0', 'S1'): 1, ('S1', 'S2'): 1}
    return Scenario(
        ScenarioNames.SDC_CHAIN,
        {'permuted': permuted, 'disturb': disturb, 's2_start': start, 'orthogonal': orthogonal},
        layout, schedule, initial,
        systems=['S0', 'S1', 'S2'], measured=['S0', 'S1', 'S2'],
        generators={'S0': DEFAULT_AMPLIFICATION},
        initiators={'S0': InitiatorKinds.A},
        environment_sizes=sizes,
        dt=dt)


def weak_measurement(coupling: float = math.pi / 4, dt: float = DefaultValues.DT) -> Scenario:
    """
    二経路の弱測定

    経路 P（等振幅）の下側の成分だけが環境 E を角度 coupling だけ回す。
    ⟨E_↑|E_↓⟩ = cos(coupling)。
    """
    if coupling < 0 or not math.isfinite(coupling):
        raise ValidationError("結合の強さは非負でなければなりません", field='coupling', value=coupling)
    layout = SpaceLayout.qubits('P', 'E')
    schedule = InteractionSchedule([
        InteractionEntry(0.0, 1.0, ('E', 'P'), HamiltonianTags.RECORD, strength=coupling),
    ])
    plus = 1 / math.sqrt(2)

    def initial() -> StateVector:
        return _product_state(StateVector.qubit('P', plus, plus), StateVector.qubit('E', 1, 0))

    return Scenario(
        ScenarioNames.WEAK_SWEEP, {'coupling': coupling}, layout, schedule, initial,
        systems=['P', 'E'], measured=['P'],
        generators={'E': DEFAULT_AMPLIFICATION},
        initiators={'E': InitiatorKinds.A},
        environment_sizes={('E', 'P'): 1},
        dt=dt)


SCENARIO_BUILDERS: Dict[str, Callable[..., Scenario]] = {
    ScenarioNames.STERN_GERLACH: stern_gerlach,
    ScenarioNames.EPR_BELL: epr_bell,
    ScenarioNames.SDC_CHAIN: sdc_chain,
    ScenarioNames.WEAK_SWEEP: weak_measurement,
}


# ---- 実行 ----

@dataclass
class RunSettings:
    """実行の設定"""
    trials: int = 1
    seed: int = DefaultValues.SEED
    workers: int = DefaultValues.WORKERS
    eps: float = DefaultValues.STABILITY_EPS
    window: float = DefaultValues.STABILITY_WINDOW
    size_threshold: int = DefaultValues.SIZE_THRESHOLD
    env_qubits: int = DefaultValues.ENV_QUBITS
    output_dir: Optional[str] = None
    output_format: str = OutputFormats.CSV
    write_graph: bool = True


@dataclass
class TrialResult:
    """1試行の結果"""
    index: int
    log: EventLog
    graph: StructureGraph
    values: Dict[str, float]
    final_state: StateVector
    trajectory: List[Tuple[float, StateVector]] = field(default_factory=list)
    extra: Dict[str, Any] = field(default_factory=dict)


def compute_evidence(scenario: Scenario, settings: RunSettings) -> Dict[InteractionEntry, ProcessClass]:
    """
    各相互作用のデコヒーレンスの分類

    相手側をスピン環境で表し、その解析的な重なりから分類する。結合定数は seed で決まる。
    """
    rng = RandomSource(settings.seed).generator
    evidence: Dict[InteractionEntry, ProcessClass] = {}
    for entry in scenario.schedule:
        size = scenario.environment_size(entry, settings.env_qubits)
        env = SpinEnvironment.random(size, rng)
        overlaps = dephasing_evidence(env, entry.duration)
        evidence[entry] = classify_process(overlaps, size, settings.eps, settings.window, settings.size_threshold)
        logger.debug(f"デコヒーレンスの根拠: {entry} -> {evidence[entry]}")
    return evidence


def _segments(scenario: Scenario) -> List[Tuple[float, float]]:
    points = scenario.schedule.boundaries(scenario.t_end)
    if points[-1] < scenario.t_end:
        points.append(scenario.t_end)
    return list(zip(points, points[1:]))


def run_trial(scenario: Scenario, engine: TheoryEngine, rng: np.random.Generator,
              evidence: Mapping[InteractionEntry, ProcessClass], index: int = 0,
              record_trajectory: bool = False, cache: Optional[PropagatorCache] = None) -> TrialResult:
    """
    1試行の実行

    区間ごとに dt 刻みで厳密に発展し、各ステップでエンジンの確率過程を進める。
    相互作用が終わるたびにエンジンへ通知する。
    """
    cache = cache or PropagatorCache()
    log = EventLog(engine.engine_type)
    ctx = RunContext(scenario.initial_state(), scenario.initial_graph(), rng, log, scenario.pointers)
    ctx.extra.update({
        'generators': list(scenario.generators),
        'locations': scenario.locations,
        'schedule': scenario.schedule,
        'evidence': evidence,
        'systems': list(scenario.systems),
    })
    log.emit(0.0, EventTypes.RUN_START, None, scenario=scenario.name, engine=engine.name, trial=index)
    for a, b in scenario.entangled:
        engine.link_entangled(ctx, a, b, 0.0)
    engine.prepare(ctx)

    trajectory: List[Tuple[float, StateVector]] = [(0.0, ctx.state)] if record_trajectory else []
    for t0, t1 in _segments(scenario):
        active = scenario.schedule.active(t0, t1)
        steps = max(1, int(math.ceil((t1 - t0) / scenario.dt - 1e-9)))
        width = (t1 - t0) / steps
        for k in range(steps):
            a = t0 + k * width
            b = t1 if k == steps - 1 else t0 + (k + 1) * width
            ctx.state = evolve_segment(ctx.state, active, a, b, scenario.self_hamiltonians or None, cache)
            engine.advance(ctx, a, b)
            ctx.time = b
            if record_trajectory:
                trajectory.append((b, ctx.state))
        for entry in scenario.schedule:
            if abs(entry.end - t1) <= Tolerances.CONSTRUCTION:
                engine.on_interaction_end(ctx, entry, evidence[entry])

    engine.finish(ctx)
    values = ctx.value_table()
    log.emit(ctx.time, EventTypes.RUN_END, None, trial=index, values=values)
    extra: Dict[str, Any] = {}
    if isinstance(engine, MwiEngine):
        extra['world_count'] = engine.world_count(ctx)
    if isinstance(engine, EnDqtEngine):
        extra['ledger'] = ctx.extra['ledger'].to_dict()
    if isinstance(engine, RelationalEngine):
        extra['tables'] = ctx.extra['tables'].snapshot()
    return TrialResult(index, log, ctx.graph, values, ctx.state, trajectory, extra)


class RunReport:
    """実行結果（イベントログ・結果の集計・代表試行のグラフ・分化度）"""

    def __init__(self, scenario: Scenario, engine: TheoryEngine, settings: RunSettings,
                 results: Sequence[TrialResult], evidence: Mapping[InteractionEntry, ProcessClass]):
        self.scenario = scenario
        self.engine = engine
        self.settings = settings
        self.evidence = dict(evidence)
        self.results = list(results)
        self.representative = self.results[0]
        self.graph = self.representative.graph
        self.log = EventLog(engine.engine_type)
        for result in self.results:
            self.log.extend(result.log, trial=result.index)
        self.statistics = self._aggregate()
        self.reports: List[DifferentiationReport] = [
            differentiation_report(self.representative.trajectory, label)
            for label in scenario.measured if self.representative.trajectory
        ]

    def _aggregate(self) -> Dict[str, Dict[str, int]]:
        # 試行の順序によらない集計
        counts: Dict[str, Counter] = {label: Counter() for label in self.scenario.measured}
        for result in self.results:
            for label in self.scenario.measured:
                value = result.values.get(f"{label}.pointer")
                counts[label]['undetermined' if value is None else f"{value:g}"] += 1
        return {label: dict(sorted(counter.items())) for label, counter in counts.items()}

    @property
    def trials(self) -> int:
        return len(self.results)

    def frequencies(self, system: str) -> Dict[str, float]:
        """決定した試行の中での値の頻度"""
        counts = {k: v for k, v in self.statistics.get(system, {}).items() if k != 'undetermined'}
        total = sum(counts.values())
        return {k: v / total for k, v in counts.items()} if total else {}

    def statistics_rows(self) -> List[List[str]]:
        rows = [['system', 'value', 'count', 'frequency']]
        for system, counts in self.statistics.items():
            for value, count in counts.items():
                rows.append([system, value, str(count), f"{count / self.trials:.12g}"])
        return rows

    def differentiation_rows(self) -> List[List[str]]:
        rows = [['system', 't', 'D*']]
        for report in self.reports:
            for t, d in report.samples:
                rows.append([report.system_label, f"{t:.12g}", f"{d:.12g}"])
        return rows

    def summary(self) -> RunSummary:
        return {
            'scenario': self.scenario.name,
            'engine': self.engine.engine_type,
            'variant': self.engine.variant,
            'seed': self.settings.seed,
            'trials': self.trials,
            'final_time': self.scenario.t_end,
            'events': len(self.log),
            'partition': self.graph.partition(),
            'statistics': self.statistics,
        }

    def to_bundle(self, output_format: Optional[str] = None) -> OutputBundle:
        """出力ファイル群（成功時にまとめて書き出す）"""
        fmt = output_format or self.settings.output_format
        bundle = OutputBundle()
        bundle.add(FilePaths.EVENT_LOG, self.log.to_jsonl())
        bundle.add('summary.json', to_json({**self.summary(), 'parameters': self.scenario.parameters,
                                            'engine_params': self.engine.describe(),
                                            'evidence': {str(e): {'kind': p.kind, **p.evidence()}
                                                         for e, p in self.evidence.items()},
                                            'extra': self.representative.extra}))
        bundle.add(f"{FilePaths.STATISTICS}.{fmt}", _format_table(self.statistics_rows(), fmt))
        if self.reports:
            bundle.add(f"differentiation.{fmt}", _format_table(self.differentiation_rows(), fmt))
        if self.settings.write_graph:
            bundle.add(FilePaths.GRAPH, self.graph.export_dot())
        return bundle


def _format_table(rows: Sequence[Sequence[Any]], fmt: str) -> str:
    if fmt == OutputFormats.JSON:
        return rows_to_json(rows)
    return rows_to_csv(rows)


def run(scenario: Scenario, engine: TheoryEngine, trials: int = 1, seed: int = DefaultValues.SEED,
        settings: Optional[RunSettings] = None) -> RunReport:
    """
    シナリオの実行

    試行ごとに seed から分割した乱数源を使うので、同じ (シナリオ, エンジン, seed) なら
    イベントログはバイト単位で一致する。最初の試行を代表としてグラフと分化度を記録する。

    Args:
        scenario: シナリオ
        engine: 理論エンジン
        trials: 試行回数（≥ 1）
        seed: 乱数シード
        settings: 実行の設定（trials・seed はこの関数の引数が優先）

    Raises:
        ValidationError: 試行回数が不正な場合
    """
    if trials < 1:
        raise ValidationError("試行回数は1以上でなければなりません", field='trials', value=trials)
    base = settings or RunSettings()
    settings = RunSettings(**{**base.__dict__, 'trials': trials, 'seed': seed})
    scenario.validate()
    logger.info(f"実行開始: {scenario.name} / {engine.name}, trials={trials}, seed={seed}")

    evidence = compute_evidence(scenario, settings)
    sources = trial_sources(seed, trials)

    def one(index: int) -> TrialResult:
        cache = shared_cache if settings.workers == 1 else None
        return run_trial(scenario, engine, sources[index].generator, evidence, index,
                         record_trajectory=(index == 0), cache=cache)

    shared_cache = PropagatorCache()
    if settings.workers > 1 and trials > 1:
        with ThreadPoolExecutor(max_workers=settings.workers) as executor:
            results = list(executor.map(one, range(trials)))
    else:
        results = [one(i) for i in range(trials)]

    report = RunReport(scenario, engine, settings, results, evidence)
    logger.info(f"実行完了: {scenario.name} / {engine.name}, events={len(report.log)}, "
                f"partition={report.graph.components()}")
    return report


# ---- 弱測定スイープ ----

def weak_sweep(grid: Iterable[float]) -> List[Dict[str, float]]:
    """
    結合の強さごとの (強さ, 最終的な重なり, D*, 干渉の可視度)

    可視度は等振幅の二経路での非対角のコヒーレンスの大きさ 2|ρ_01|。

    Raises:
        ValidationError: グリッドが空か、負の強さを含む場合
    """
    strengths = [float(s) for s in grid]
    if not strengths:
        raise ValidationError("結合の強さのグリッドが空です", field='grid')
    rows = []
    for strength in strengths:
        scenario = weak_measurement(strength)
        final = run_schedule(scenario.initial_state(), scenario.schedule, dt=scenario.t_end).final
        rho_p = partial_trace(final.to_density(), {'P'})
        overlap = environment_overlaps(final, 'P', Observable.pauli_z('P'), time=scenario.t_end).max_off_diagonal()
        rows.append({
            'strength': strength,
            'overlap': float(overlap),
            'degree': degree_of_differentiation(rho_p),
            'visibility': float(2 * abs(rho_p.matrix[0, 1])),
        })
        logger.debug(f"弱測定: g={strength:.6g}, overlap={overlap:.6g}")
    return rows


def weak_sweep_rows(rows: Sequence[Mapping[str, float]]) -> List[List[str]]:
    table = [['strength', 'overlap', 'D*', 'visibility']]
    for row in rows:
        table.append([f"{row['strength']:.12g}", f"{row['overlap']:.12g}",
                      f"{row['degree']:.12g}", f"{row['visibility']:.12g}"])
    return table


def is_monotone(rows: Sequence[Mapping[str, float]], tol: float = Tolerances.COMPLETENESS) -> bool:
    """D* が非減少、可視度が非増加か"""
    degrees = [r['degree'] for r in rows]
    visibilities = [r['visibility'] for r in rows]
    return (all(b >= a - tol for a, b in zip(degrees, degrees[1:]))
            and all(b <= a + tol for a, b in zip(visibilities, visibilities[1:])))


# ---- ベル統計 ----

def _pair_counts(report: RunReport) -> Counter:
    pair_counts: Counter = Counter()
    for result in report.results:
        x, y = result.values.get('A.pointer'), result.values.get('B.pointer')
        if x is not None and y is not None:
            pair_counts[(x, y)] += 1
    return pair_counts


def matches_joint_distribution(pair_counts: Mapping[Tuple[float, float], int], trials: int,
                               components: Sequence[Tuple[Tuple[float, ...], float, StateVector]],
                               p_value: float = DefaultValues.CALIBRATION_P_VALUE) -> Tuple[bool, float]:
    """
    エンジンの試行の結果がボルン則の同時分布と整合するか

    両翼の値が出なかった試行や重み0の結果が一つでもあれば不一致。
    それ以外はカイ二乗検定の p 値が p_value を超えれば一致とする。

    Returns:
        (一致するか, p 値)
    """
    expected = {tuple(values): weight for values, weight, _ in components if weight > Tolerances.WORLD_PRUNE}
    total = sum(pair_counts.values())
    if total == 0 or total < trials:
        return False, 0.0
    if any(n > 0 and key not in expected for key, n in pair_counts.items()):
        return False, 0.0
    if len(expected) < 2:
        return True, 1.0
    keys = sorted(expected)
    weights = np.array([expected[k] for k in keys])
    observed = np.array([pair_counts.get(k, 0) for k in keys], dtype=float)
    p = float(stats.chisquare(observed, weights / weights.sum() * total).pvalue)
    return p > p_value, p


def bell_statistics(engine_type: str, angles: Sequence[float], trials: int, seed: int = DefaultValues.SEED,
                    variant: Optional[str] = None, sign: int = -1,
                    params: Optional[Mapping[str, Any]] = None, exact_trials: bool = False) -> Dict[str, Any]:
    """
    4つの設定の組 (a,b), (a,b′), (a′,b), (a′,b′) での相関と CHSH 量

    各設定の組でまずエンジンの試行を BELL_CALIBRATION_TRIALS 回（trials が少なければ trials 回）走らせる。
    その結果がボルン則の同時分布と整合すれば、残りの試行は同時分布から seed で決まる多項分布として引く。
    整合しなければ全ての試行をエンジンで実行する。exact_trials では最初から全試行をエンジンで実行する。

    Args:
        engine_type: エンジン
        angles: (a, a′, b, b′)（ラジアン）
        trials: 設定の組あたりの試行回数
        seed: 乱数シード
        variant: MWI・関係主義の変種
        sign: もつれ状態の相対位相
        params: エンジン固有のパラメータ
        exact_trials: 全試行をエンジンで実行するか
    """
    if len(angles) != 4:
        raise ValidationError("角度は (a, a′, b, b′) の4つです", field='angles', value=list(angles))
    if trials < 1:
        raise ValidationError("試行回数は1以上でなければなりません", field='trials', value=trials)
    a, a2, b, b2 = angles
    settings = {(0, 0): (a, b), (0, 1): (a, b2), (1, 0): (a2, b), (1, 1): (a2, b2)}
    sources = RandomSource(seed).split(len(settings))
    correlators: Dict[Tuple[int, int], float] = {}
    counts: Dict[str, Dict[str, int]] = {}
    sampling: Dict[str, str] = {}
    for (key, (angle_a, angle_b)), source in zip(sorted(settings.items()), sources):
        scenario = epr_bell(angle_a, angle_b, sign)
        engine = _engine_for(scenario, engine_type, variant, params)
        trial_seed = int(source.generator.integers(2 ** 31))
        mode = SamplingModes.ENGINE
        if exact_trials:
            pair_counts = _pair_counts(run(scenario, engine, trials, trial_seed))
        else:
            calibration = min(trials, DefaultValues.BELL_CALIBRATION_TRIALS)
            pair_counts = _pair_counts(run(scenario, engine, calibration, trial_seed))
            if calibration < trials:
                components = joint_components(scenario.initial_state(), ['A', 'B'],
                                              [scenario.pointers['A'], scenario.pointers['B']], prune=0.0)
                matches, p = matches_joint_distribution(pair_counts, calibration, components)
                if matches:
                    mode = SamplingModes.CALIBRATED
                    probabilities = np.array([w for _, w, _ in components])
                    drawn = source.generator.multinomial(trials - calibration, probabilities / probabilities.sum())
                    pair_counts.update({tuple(v): int(n) for (v, _, _), n in zip(components, drawn) if n})
                else:
                    logger.warning(f"エンジンの試行がボルン則の同時分布と整合しないため全試行を実行: "
                                   f"{engine.name} ({angle_a:.6g},{angle_b:.6g}) p={p:.3g}")
                    pair_counts = _pair_counts(run(scenario, engine, trials, trial_seed))
        total = sum(pair_counts.values())
        if total == 0:
            raise EngineError("両翼の値が一度も出ませんでした", engine=engine_type, operation='bell')
        correlators[key] = sum(x * y * n for (x, y), n in pair_counts.items()) / total
        setting = f"{angle_a:.12g},{angle_b:.12g}"
        counts[setting] = {f"{x:g},{y:g}": n for (x, y), n in sorted(pair_counts.items())}
        sampling[setting] = mode
    s_value = chsh_from_correlators(correlators)
    logger.info(f"ベル統計: {engine_type}, trials={trials}, S={s_value:.6f}")
    return {
        'engine': engine_type,
        'angles': list(angles),
        'trials': trials,
        'correlators': {f"{k[0]},{k[1]}": v for k, v in sorted(correlators.items())},
        'chsh': s_value,
        'chsh_abs': abs(s_value),
        'counts': counts,
        'sampling': sampling,
    }


def no_signalling_check(counts: Mapping[str, Mapping[str, int]], sigmas: float = 4.0) -> Tuple[bool, float]:
    """
    A の周辺分布が B の設定によらないか（標準誤差の sigmas 倍以内）

    Args:
        counts: bell_statistics の counts（"a,b" → {"x,y": 回数}）

    Returns:
        (無信号か, 最大のずれ（標準誤差単位）)
    """
    marginals: Dict[str, List[Tuple[float, int]]] = {}
    for setting, table in counts.items():
        angle_a = setting.split(',')[0]
        total = sum(table.values())
        plus = sum(n for outcome, n in table.items() if float(outcome.split(',')[0]) > 0)
        marginals.setdefault(angle_a, []).append((plus / total, total))
    worst = 0.0
    for samples in marginals.values():
        for (p1, n1), (p2, n2) in zip(samples, samples[1:]):
            pooled = (p1 * n1 + p2 * n2) / (n1 + n2)
            se = math.sqrt(max(pooled * (1 - pooled), 1e-12) * (1 / n1 + 1 / n2))
            worst = max(worst, abs(p1 - p2) / se)
    return worst <= sigmas, worst


# ---- 設定ファイル ----

_SCENARIO_KEYS: Dict[str, Dict[str, str]] = {
    ScenarioNames.STERN_GERLACH: {'theta': 'angle', 'detector': 'bool', 'recombine': 'bool'},
    ScenarioNames.EPR_BELL: {'angle_a': 'angle', 'angle_b': 'angle', 'sign': 'sign'},
    ScenarioNames.SDC_CHAIN: {'permuted': 'bool', 'disturb': 'bool', 's2_start': 'nonneg', 'orthogonal': 'bool'},
    ScenarioNames.WEAK_SWEEP: {'coupling': 'nonneg'},
}

_SECTION_KEYS: Dict[str, set] = {
    'scenario': {'name', 'dt', 'differentiated'},
    'engine': {'type', 'variant', 'trials', 'seed', 'workers'},
    'output': {'dir', 'format', 'graph'},
    'grw': {'lambda', 'sigma', 'spacing', 'amplification'},
    'mwi': {'variant'},
    'relational': {'variant', 'generators'},
    'endqt': {'initiators', 'touching_counts', 'composites', 'env_qubits'},
    'stability': {'eps', 'window', 'size_threshold', 'env_qubits'},
}

_MISSING = object()


@dataclass
class ScenarioConfig:
    """読み込んだ設定（シナリオ・エンジン・実行の設定）"""
    scenario: Scenario
    engine: TheoryEngine
    settings: RunSettings
    text: str = ''


class _ConfigReader:
    """エラーを集めながら値を読む"""

    def __init__(self, parser: configparser.ConfigParser):
        self.parser = parser
        self.errors: List[str] = []

    def error(self, message: str) -> None:
        self.errors.append(message)

    def raw(self, section: str, key: str) -> Optional[str]:
        if self.parser.has_section(section) and self.parser.has_option(section, key):
            return self.parser.get(section, key).strip()
        return None

    def value(self, section: str, key: str, convert: Callable[[str], Any], default: Any = _MISSING,
              check: Optional[Callable[[Any], bool]] = None, requirement: str = '') -> Any:
        text = self.raw(section, key)
        if text is None:
            if default is _MISSING:
                self.error(f"{section}.{key}: missing required key")
                return None
            return default
        try:
            result = convert(text)
        except (TypeError, ValueError):
            self.error(f"{section}.{key}: invalid value {text!r}")
            return default if default is not _MISSING else None
        if check is not None and not check(result):
            self.error(f"{section}.{key} must be {requirement}")
            return default if default is not _MISSING else None
        return result


def _to_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered not in configparser.ConfigParser.BOOLEAN_STATES:
        raise ValueError(text)
    return configparser.ConfigParser.BOOLEAN_STATES[lowered]


def _to_angle(text: str) -> float:
    # 設定ファイルの角度は度
    return math.radians(float(text))


def _to_mapping(text: str) -> Dict[str, str]:
    """'D=20, Alice=20' → {'D': '20', 'Alice': '20'}"""
    result = {}
    for item in filter(None, (part.strip() for part in text.replace(';', ',').split(','))):
        if '=' not in item:
            raise ValueError(item)
        key, value = (s.strip() for s in item.split('=', 1))
        if not key or not value:
            raise ValueError(item)
        result[key] = value
    return result


def _to_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(',') if part.strip()]


def _is_finite(value: float) -> bool:
    return math.isfinite(value)


_CONVERTERS: Dict[str, Tuple[Callable[[str], Any], Callable[[Any], bool], str]] = {
    'angle': (_to_angle, _is_finite, 'a finite angle in degrees'),
    'bool': (_to_bool, lambda v: True, 'a boolean'),
    'sign': (int, lambda v: v in (1, -1), '+1 or -1'),
    'nonneg': (float, lambda v: math.isfinite(v) and v >= 0, '>= 0'),
}


def _parse_ini(text: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"設定ファイルを解析できません: {e}", errors=[f"syntax: {e}"])
    return parser


def load_config(text: str, overrides: Optional[Mapping[str, str]] = None,
                defaults: Optional[RunSettings] = None) -> ScenarioConfig:
    """
    設定ファイル（INI形式）の読み込み

    未知のキー・必須キーの欠落・範囲外の値を全て集め、まとめて ConfigError で報告する。

    Args:
        text: 設定ファイルの内容
        overrides: 'section.key' → 値（スイープ用の上書き）
        defaults: 実行の設定の既定値（環境変数から読んだもの）

    Raises:
        ConfigError: 設定が不正な場合（errors に全てのメッセージ）
    """
    parser = _parse_ini(text)
    for path, value in (overrides or {}).items():
        if '.' not in path:
            raise ConfigError(f"パラメータのパスが不正です: {path}", config_key=path,
                              errors=[f"{path}: expected section.key"])
        section, key = path.split('.', 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, str(value))

    reader = _ConfigReader(parser)
    base = defaults or RunSettings()

    name = reader.value('scenario', 'name', str)
    if name is not None and name not in SCENARIO_BUILDERS:
        reader.error(f"scenario.name must be one of {', '.join(ScenarioNames.get_all())}")
        name = None
    allowed = dict(_SECTION_KEYS)
    allowed['scenario'] = _SECTION_KEYS['scenario'] | set(_SCENARIO_KEYS.get(name, {}))
    for section in parser.sections():
        if section not in allowed:
            reader.error(f"[{section}]: unknown section")
            continue
        for key in parser.options(section):
            if key not in allowed[section]:
                reader.error(f"{section}.{key}: unknown key")

    dt = reader.value('scenario', 'dt', float, DefaultValues.DT, lambda v: math.isfinite(v) and v > 0, '> 0')
    scenario_kwargs: Dict[str, Any] = {}
    for key, kind in _SCENARIO_KEYS.get(name, {}).items():
        convert, check, requirement = _CONVERTERS[kind]
        result = reader.value('scenario', key, convert, None, check, requirement)
        if result is not None:
            scenario_kwargs[key] = result

    engine_type = reader.value('engine', 'type', str)
    if engine_type is not None and engine_type not in EngineTypes.get_all():
        reader.error(f"engine.type must be one of {', '.join(EngineTypes.get_all())}")
        engine_type = None
    positive_int = (lambda v: v >= 1, '>= 1')
    settings = RunSettings(
        trials=reader.value('engine', 'trials', int, base.trials, *positive_int),
        seed=reader.value('engine', 'seed', int, base.seed, lambda v: v >= 0, '>= 0'),
        workers=reader.value('engine', 'workers', int, base.workers, *positive_int),
        eps=reader.value('stability', 'eps', float, base.eps, lambda v: 0 < v < 1, 'in (0, 1)'),
        window=reader.value('stability', 'window', float, base.window, lambda v: 0 < v <= 1, 'in (0, 1]'),
        size_threshold=reader.value('stability', 'size_threshold', int, base.size_threshold, *positive_int),
        env_qubits=reader.value('stability', 'env_qubits', int, base.env_qubits, *positive_int),
        output_dir=reader.value('output', 'dir', str, base.output_dir),
        output_format=reader.value('output', 'format', str, base.output_format,
                                   lambda v: v in OutputFormats.get_all(), 'csv or json'),
        write_graph=reader.value('output', 'graph', _to_bool, base.write_graph),
    )

    scenario = None
    if name is not None:
        try:
            scenario = SCENARIO_BUILDERS[name](dt=dt or DefaultValues.DT, **scenario_kwargs)
            scenario.mark_differentiated(reader.value('scenario', 'differentiated', _to_list, []))
        except ValidationError as e:
            reader.error(f"scenario: {e.message}")

    engine = None
    if engine_type is not None and scenario is not None:
        engine = _engine_from_config(reader, engine_type, scenario, settings)
        if engine is not None and engine_type == EngineTypes.ENDQT:
            # [endqt] の環境の大きさは分類の根拠にも使う
            settings.env_qubits = engine.params.env_qubits

    if reader.errors:
        for message in reader.errors:
            logger.error(f"設定エラー: {message}")
        raise ConfigError(f"設定が不正です ({len(reader.errors)} 件)", errors=reader.errors)
    logger.info(f"設定を読み込みました: {scenario.name} / {engine.name}")
    return ScenarioConfig(scenario, engine, settings, text)


def _engine_from_config(reader: _ConfigReader, engine_type: str, scenario: Scenario,
                        settings: RunSettings) -> Optional[TheoryEngine]:
    variant = reader.raw('engine', 'variant')
    if engine_type == EngineTypes.GRW:
        amplification = dict(scenario.generators)
        extra = reader.value('grw', 'amplification', _to_mapping, {})
        for label, count in (extra or {}).items():
            try:
                amplification[label] = float(count)
            except ValueError:
                reader.error(f"grw.amplification: invalid count for {label}")
        lam = reader.value('grw', 'lambda', float, DefaultValues.GRW_LAMBDA,
                           lambda v: math.isfinite(v) and v > 0, '> 0')
        sigma = reader.value('grw', 'sigma', float, DefaultValues.GRW_SIGMA,
                             lambda v: math.isfinite(v) and v > 0, '> 0')
        spacing = reader.value('grw', 'spacing', float, 1.0, lambda v: math.isfinite(v) and v > 0, '> 0')
        params = {'lam': lam, 'sigma': sigma, 'amplification': amplification, 'spacing': spacing}
    elif engine_type == EngineTypes.MWI:
        variant = reader.raw('mwi', 'variant') or variant or MwiVariants.QUASI_LOCAL
        if variant not in MwiVariants.get_all():
            reader.error(f"mwi.variant must be one of {', '.join(MwiVariants.get_all())}")
            return None
        params = {}
    elif engine_type == EngineTypes.RELATIONAL:
        variant = reader.raw('relational', 'variant') or variant or RelationalVariants.RQM
        if variant not in RelationalVariants.get_all():
            reader.error(f"relational.variant must be one of {', '.join(RelationalVariants.get_all())}")
            return None
        generators = reader.value('relational', 'generators', _to_list, list(scenario.generators))
        params = {'generators': generators}
    else:
        initiators = reader.value('endqt', 'initiators', _to_mapping, dict(scenario.initiators)) or {}
        for label, kind in initiators.items():
            if kind not in (InitiatorKinds.A, InitiatorKinds.B):
                reader.error(f"endqt.initiators: kind for {label} must be A or B")
        composites_text = reader.value('endqt', 'composites', _to_mapping, {}) or {}
        params = {
            'initiators': initiators,
            'eps': settings.eps,
            'window': settings.window,
            'size_threshold': settings.size_threshold,
            'env_qubits': reader.value('endqt', 'env_qubits', int, settings.env_qubits, lambda v: v >= 1, '>= 1'),
            'touching_counts': reader.value('endqt', 'touching_counts', _to_bool, False),
            'composites': {k: [p.strip() for p in v.split('+') if p.strip()] for k, v in composites_text.items()},
        }
    if reader.errors:
        return None
    try:
        return create_engine(engine_type, variant if engine_type in (EngineTypes.MWI, EngineTypes.RELATIONAL) else None,
                             params)
    except ValidationError as e:
        reader.error(e.message)
        return None


def _engine_for(scenario: Scenario, engine_type: str, variant: Optional[str] = None,
                params: Optional[Mapping[str, Any]] = None) -> TheoryEngine:
    """シナリオの既定（生成子・イニシエータ）を補ったエンジン"""
    merged = dict(params or {})
    if engine_type == EngineTypes.GRW:
        merged.setdefault('amplification', dict(scenario.generators))
    elif engine_type == EngineTypes.RELATIONAL:
        merged.setdefault('generators', list(scenario.generators))
    elif engine_type == EngineTypes.ENDQT:
        merged.setdefault('initiators', dict(scenario.initiators))
    return create_engine(engine_type, variant, merged)


def parameter_sweep(text: str, path: str, values: Sequence[str],
                    defaults: Optional[RunSettings] = None) -> List[SweepRow]:
    """
    任意の数値パラメータのスイープ

    値ごとに設定を上書きして実行し、最初の集計対象の系の最終的な D*、
    最後の相互作用の分類、イベント数を並べる。
    """
    if not values:
        raise ValidationError("スイープの値が空です", field='values')
    rows: List[SweepRow] = []
    for value in values:
        config = load_config(text, {path: value}, defaults)
        report = run(config.scenario, config.engine, config.settings.trials, config.settings.seed, config.settings)
        last = list(config.scenario.schedule)[-1] if len(config.scenario.schedule) else None
        degree = report.reports[0].values()[-1] if report.reports else float('nan')
        rows.append({
            'parameter': path,
            'value': float(value),
            'degree': degree,
            'process_class': report.evidence[last].kind if last is not None else '',
            'events': len(report.log),
        })
        logger.info(f"スイープ: {path}={value} -> D*={degree:.6g}")
    return rows


def sweep_rows(rows: Sequence[SweepRow]) -> List[List[str]]:
    table = [['parameter', 'value', 'D*', 'process_class', 'events']]
    for row in rows:
        table.append([row['parameter'], f"{row['value']:.12g}", f"{row['degree']:.12g}",
                      row['process_class'], str(row['events'])])
    return table


# ---- 検証スイート ----

def _check(results: List[Dict[str, Any]], name: str, passed: bool, detail: str) -> None:
    results.append({'check': name, 'passed': bool(passed), 'detail': detail})
    if not passed:
        logger.error(f"検証失敗: {name} ({detail})")


def _verify_eq3(results: List[Dict[str, Any]], rng: np.random.Generator) -> None:
    for dim in range(2, 9):
        layout = SpaceLayout([('S', dim)])
        pure = degree_of_differentiation(StateVector.basis(layout, 0).to_density())
        mixed = degree_of_differentiation(DensityOperator.maximally_mixed(layout))
        _check(results, f"D*(pure, d={dim}) = 0", abs(pure) <= 1e-9, f"{pure:.3g}")
        _check(results, f"D*(mixed, d={dim}) = 1", abs(mixed - 1) <= 1e-9, f"{mixed:.12g}")


def _verify_dephasing(results: List[Dict[str, Any]], rng: np.random.Generator) -> None:
    env = SpinEnvironment.random(6, rng)
    plus = 1 / math.sqrt(2)
    worst = 0.0
    for t in np.linspace(0.0, 3.0, 100):
        joint = spin_env_evolve(StateVector.qubit('S', plus, plus), env, float(t))
        simulated = environment_overlaps(joint, 'S', Observable.pauli_z('S')).max_off_diagonal()
        worst = max(worst, abs(simulated - abs(env.analytic_overlap(float(t)))))
    _check(results, "spin environment matches analytic overlap", worst <= 1e-9, f"max error {worst:.3g}")


def _verify_bell(results: List[Dict[str, Any]], rng: np.random.Generator) -> None:
    grid = [k * math.pi / 8 for k in range(16)]
    model = QuantumCausalModel.bell(singlet_state(), grid, grid)
    worst = max(abs(correlator(model, a, b) + math.cos(a - b)) for a in grid for b in grid)
    _check(results, "singlet correlator = -cos(a-b)", worst <= 1e-10, f"max error {worst:.3g}")
    angles = (0.0, math.pi / 2, math.pi / 4, 3 * math.pi / 4)
    optimal = QuantumCausalModel.bell(singlet_state(), angles[:2], angles[2:])
    s_value = chsh(optimal, angles)
    _check(results, "|CHSH| = 2*sqrt(2)", abs(abs(s_value) - 2 * math.sqrt(2)) <= 1e-9, f"S={s_value:.12g}")
    bound = classical_chsh_bound()
    _check(results, "classical bound = 2", bound == 2.0, f"{bound:g}")
    worst_mixture = 0.0
    for _ in range(1000):
        table, weights = random_factorizable_mixture(rng)
        worst_mixture = max(worst_mixture, abs(chsh_from_correlators(table_correlators(table, weights))))
    _check(results, "factorizable mixtures obey |S| <= 2", worst_mixture <= 2 + 1e-9, f"max {worst_mixture:.12g}")
    holds, _ = factorizability_check(random_factorizable_mixture(rng)[0])
    _check(results, "random mixture components factorize", holds, str(holds))


def _verify_sweep(results: List[Dict[str, Any]], rng: np.random.Generator) -> None:
    rows = weak_sweep(np.linspace(0.0, math.pi / 2, 10))
    _check(results, "weak sweep monotone", is_monotone(rows), f"{len(rows)} points")
    first, last = rows[0], rows[-1]
    _check(results, "strength 0 endpoint",
           abs(first['degree']) <= 1e-9 and abs(first['visibility'] - 1) <= 1e-9,
           f"D*={first['degree']:.3g}, vis={first['visibility']:.12g}")
    _check(results, "strength pi/2 endpoint",
           abs(last['degree'] - 1) <= 1e-9 and abs(last['visibility']) <= 1e-9,
           f"D*={last['degree']:.12g}, vis={last['visibility']:.3g}")


def random_structure_graph(rng: np.random.Generator, steps: int = 30, size: int = 6) -> StructureGraph:
    """無作為な操作列で作った相互作用グラフ（拒否された操作は飛ばす）"""
    graph = StructureGraph()
    labels = [f"N{i}" for i in range(size)]
    for label in labels:
        locations = ('left', 'right') if rng.random() < 0.3 else ()
        graph.add_node(label, locations=locations)
    t = 0.0
    for _ in range(steps):
        t += float(rng.random())
        source, target = (labels[i] for i in rng.choice(size, size=2, replace=False))
        action = int(rng.integers(5))
        try:
            if action == 0:
                graph.add_interaction(source, target, EdgeKinds.SDI, t)
            elif action == 1:
                graph.add_interaction(source, target, EdgeKinds.UDI, t, directed=bool(rng.integers(2)))
            elif action == 2:
                graph.add_interaction(source, source, EdgeKinds.POTENTIAL_DESTRUCTION, t)
            elif action == 3:
                node = graph.node(source)
                graph.promote_destruction(source, sorted(node.locations)[0] if node.locations else 'left', t)
            else:
                graph.mark_determinate(source, t)
        except StructureError:
            continue
    return graph


def _verify_structure(results: List[Dict[str, Any]], rng: np.random.Generator) -> None:
    failures = 0
    for _ in range(1000):
        graph = random_structure_graph(rng)
        try:
            graph.partition()
        except IntegrityError:
            failures += 1
    _check(results, "no mixed DS/IS component", failures == 0, f"{failures} failures in 1000 graphs")
    graph = random_structure_graph(rng)
    dot = graph.export_dot()
    _check(results, "DOT lists every node", all(f'"{n}"' in dot for n in graph.nodes), f"{len(graph.nodes)} nodes")


_VERIFY_SUITES: Dict[str, Callable[[List[Dict[str, Any]], np.random.Generator], None]] = {
    VerifySuites.EQ3: _verify_eq3,
    VerifySuites.DEPHASING: _verify_dephasing,
    VerifySuites.BELL: _verify_bell,
    VerifySuites.SWEEP: _verify_sweep,
    VerifySuites.STRUCTURE: _verify_structure,
}


def verify_suite(name: str, seed: int = DefaultValues.SEED) -> List[Dict[str, Any]]:
    """
    不変条件の検証スイートを実行

    Returns:
        [{'check', 'passed', 'detail'}] のリスト

    Raises:
        ValidationError: 未知のスイートの場合
    """
    if name not in _VERIFY_SUITES:
        raise ValidationError(f"未知の検証スイートです: {name}", field='suite', value=name)
    results: List[Dict[str, Any]] = []
    _VERIFY_SUITES[name](results, RandomSource(seed).generator)
    passed = sum(1 for r in results if r['passed'])
    logger.info(f"検証スイート {name}: {passed}/{len(results)} 合格")
    return results
