"""
生成的量子論シミュレータ - 因果モデル

このモジュールは以下を提供します：
- DAG と古典因果モデル（因果マルコフ条件の検査）
- 分解可能性 P(ab|xyλ) = P(a|xλ)P(b|yλ) の検査
- 量子因果モデルのボルン則と CHSH 量
- 決定論的戦略の全列挙による古典的な CHSH 上限
- EnDQT のベル実験ログからの因果構造グラフ
"""

import itertools
import logging
import math
from typing import Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from constants import EdgeKinds, EngineTypes, EventTypes, NodeKinds, Tolerances
from event_log import EventLog, csv_to_rows, rows_to_csv
from exceptions import DimensionError, ValidationError
from hilbert import Channel, DensityOperator, Povm, SpaceLayout, StateVector, apply_channel, embed_operator
from structures import StructureGraph

logger = logging.getLogger(__name__)

CHSH_CLASSICAL_BOUND = 2.0
TABLE_HEADER = ['setting_a', 'setting_b', 'outcome_a', 'outcome_b', 'probability']

# 分解可能性の表の軸 (a, b, x, y, λ)。結果の添字 0 が +1、1 が −1
OUTCOME_VALUES = (1, -1)


class Dag:
    """有向非巡回グラフ"""

    def __init__(self, nodes: Sequence[str], edges: Sequence[Tuple[str, str]] = ()):
        graph = nx.DiGraph()
        graph.add_nodes_from(nodes)
        for source, target in edges:
            if source not in graph or target not in graph:
                raise ValidationError(f"未宣言の変数を含む辺です: {source}->{target}", field='edges',
                                      value=(source, target))
            graph.add_edge(source, target)
        if not nx.is_directed_acyclic_graph(graph):
            raise ValidationError("グラフに閉路があります", field='edges', value=list(edges))
        self._graph = graph
        self.nodes: List[str] = list(nodes)
        self.order: List[str] = list(nx.lexicographical_topological_sort(graph))

    @property
    def edges(self) -> List[Tuple[str, str]]:
        return list(self._graph.edges())

    def parents(self, node: str) -> List[str]:
        """親（宣言順）"""
        parents = set(self._graph.predecessors(node))
        return [n for n in self.nodes if n in parents]

    def axis(self, node: str) -> int:
        return self.nodes.index(node)

    def __repr__(self) -> str:
        return f"Dag(nodes={self.nodes}, edges={self.edges})"


def bell_common_cause_dag() -> Dag:
    """共通原因 Λ と独立な設定 X, Y を持つベル実験の因果構造"""
    return Dag(['X', 'Y', 'Lambda', 'A', 'B'],
               [('X', 'A'), ('Lambda', 'A'), ('Lambda', 'B'), ('Y', 'B')])


class ClassicalCausalModel:
    """DAG 上の古典因果モデル"""

    def __init__(self, dag: Dag, cardinalities: Mapping[str, int], cpts: Mapping[str, np.ndarray]):
        """
        Args:
            dag: 因果構造
            cardinalities: 変数 → 取りうる値の数
            cpts: 変数 → 条件付き確率表（軸は親（宣言順）の後に変数自身）
        """
        self.dag = dag
        self.cardinalities = {node: int(cardinalities[node]) for node in dag.nodes}
        self.cpts: Dict[str, np.ndarray] = {}
        for node in dag.nodes:
            if node not in cpts:
                raise ValidationError(f"条件付き確率表がありません: {node}", field='cpts', value=node)
            table = np.asarray(cpts[node], dtype=float)
            expected = tuple(self.cardinalities[p] for p in dag.parents(node)) + (self.cardinalities[node],)
            if table.shape != expected:
                raise DimensionError(f"条件付き確率表の形が親と一致しません: {node}", expected=expected,
                                     actual=table.shape)
            if table.min() < 0:
                raise ValidationError(f"負の確率があります: {node}", field=node)
            if np.max(np.abs(table.sum(axis=-1) - 1.0)) > Tolerances.COMPLETENESS:
                raise ValidationError(f"条件付き確率表の行の和が1ではありません: {node}", field=node)
            self.cpts[node] = table

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.cardinalities[n] for n in self.dag.nodes)

    def joint(self) -> np.ndarray:
        """Π_j P(X_j | Pa(X_j)) による同時分布（軸は dag.nodes の順）"""
        joint = np.ones(self.shape)
        for node in self.dag.nodes:
            axes = [self.dag.axis(p) for p in self.dag.parents(node)] + [self.dag.axis(node)]
            joint = joint * _broadcast(self.cpts[node], axes, len(self.dag.nodes))
        return joint


def _broadcast(table: np.ndarray, axes: Sequence[int], ndim: int) -> np.ndarray:
    # 指定軸に table を置き、残りの軸を長さ1にする
    order = np.argsort(axes)
    moved = np.transpose(table, order)
    shape = [1] * ndim
    for axis, size in zip(sorted(axes), moved.shape):
        shape[axis] = size
    return moved.reshape(shape)


def cmc_check(model: ClassicalCausalModel, joint: np.ndarray) -> Tuple[bool, float]:
    """
    因果マルコフ条件の検査

    同時分布自身から求めた条件付き確率の積 Π_j P(X_j | Pa(X_j)) と比べる。
    親の周辺確率が0の条件付き確率は定義されないので、その寄与は0とする。

    Returns:
        (マルコフ的か, 最大の絶対偏差)

    Raises:
        DimensionError: 同時分布の形が変数の値の数と一致しない場合
        ValidationError: 同時分布が確率分布でない場合
    """
    joint = np.asarray(joint, dtype=float)
    if joint.shape != model.shape:
        raise DimensionError("同時分布の形が変数の値の数と一致しません", expected=model.shape, actual=joint.shape)
    if joint.min() < -Tolerances.CONSTRUCTION or abs(joint.sum() - 1.0) > Tolerances.COMPLETENESS:
        raise ValidationError("同時分布が確率分布ではありません", field='joint', value=float(joint.sum()))

    ndim = joint.ndim
    product = np.ones_like(joint)
    for node in model.dag.nodes:
        family = {model.dag.axis(p) for p in model.dag.parents(node)}
        own = model.dag.axis(node)
        other = tuple(i for i in range(ndim) if i not in family and i != own)
        with_node = joint.sum(axis=other, keepdims=True)
        parents_only = with_node.sum(axis=own, keepdims=True)
        conditional = np.divide(with_node, parents_only, out=np.zeros_like(with_node), where=parents_only > 0)
        product = product * conditional
    violation = float(np.max(np.abs(joint - product)))
    markov = violation <= Tolerances.COMPLETENESS
    logger.debug(f"CMC検査: markov={markov}, 最大偏差={violation:.3g}")
    return markov, violation


def factorizability_check(p: np.ndarray) -> Tuple[bool, float]:
    """
    分解可能性の検査 P(ab|xyλ) = P(a|xλ)P(b|yλ)

    Args:
        p: 軸 (a, b, x, y, λ) の表

    Returns:
        (分解可能か, 最大の絶対偏差)

    Raises:
        ValidationError: (x, y, λ) ごとの和が1でない場合
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 5:
        raise DimensionError("表の軸は (a, b, x, y, λ) の5つです", expected=5, actual=p.ndim)
    sums = p.sum(axis=(0, 1))
    if p.min() < -Tolerances.CONSTRUCTION or np.max(np.abs(sums - 1.0)) > Tolerances.COMPLETENESS:
        raise ValidationError("(x, y, λ) ごとに正規化されていません", field='table', value=sums.tolist())

    p_a = p.sum(axis=1)  # (a, x, y, λ)
    p_b = p.sum(axis=0)  # (b, x, y, λ)
    product = p_a[:, None, :, :, :] * p_b[None, :, :, :, :]
    violation = float(np.max(np.abs(p - product)))
    # P(a|xλ) は y に、P(b|yλ) は x によらない
    violation = max(violation, float(np.max(np.abs(p_a - p_a[:, :, :1, :]))),
                    float(np.max(np.abs(p_b - p_b[:, :1, :, :]))))
    return violation <= Tolerances.COMPLETENESS, violation


class QuantumCausalModel:
    """共通原因 ρ_Λ を持つ量子因果モデル"""

    def __init__(self, rho_lambda: DensityOperator, channel_a: Channel, channel_b: Channel,
                 povm_a: Mapping[Hashable, Povm], povm_b: Mapping[Hashable, Povm]):
        """
        Args:
            rho_lambda: 2因子の共通原因の状態（第1因子がAへ、第2因子がBへ運ばれる）
            channel_a: Aへのチャネル
            channel_b: Bへのチャネル
            povm_a: 設定 s → Aの測定
            povm_b: 設定 t → Bの測定
        """
        if len(rho_lambda.layout) != 2:
            raise ValidationError("共通原因の状態は2因子でなければなりません", field='rho_lambda',
                                  value=rho_lambda.layout.labels)
        self.label_a, self.label_b = rho_lambda.layout.labels
        self.rho_lambda = rho_lambda
        self.channel_a = channel_a
        self.channel_b = channel_b
        self.povm_a = dict(povm_a)
        self.povm_b = dict(povm_b)
        if not self.povm_a or not self.povm_b:
            raise ValidationError("各側に少なくとも1つの設定が必要です", field='povm')
        rho = apply_channel(rho_lambda, channel_a, [self.label_a])
        self.rho_out = apply_channel(rho, channel_b, [self.label_b])
        for povms, label in ((self.povm_a, self.label_a), (self.povm_b, self.label_b)):
            dim = self.rho_out.layout.dim_of(label)
            for setting, povm in povms.items():
                if povm.dim != dim:
                    raise DimensionError(f"設定 {setting} の測定の次元が一致しません", expected=dim, actual=povm.dim)

    @classmethod
    def bell(cls, state: StateVector, angles_a: Sequence[float], angles_b: Sequence[float],
             channel_a: Optional[Channel] = None, channel_b: Optional[Channel] = None) -> 'QuantumCausalModel':
        """角度（ラジアン）を設定とするスピン測定のモデル"""
        dim_a, dim_b = state.layout.dims
        return cls(state.to_density(),
                   channel_a or Channel.identity(dim_a), channel_b or Channel.identity(dim_b),
                   {a: Povm.spin_measurement(a) for a in angles_a},
                   {b: Povm.spin_measurement(b) for b in angles_b})

    @property
    def settings_a(self) -> List[Hashable]:
        return list(self.povm_a)

    @property
    def settings_b(self) -> List[Hashable]:
        return list(self.povm_b)


def singlet_state(sign: int = -1, labels: Tuple[str, str] = ('A', 'B')) -> StateVector:
    """(|01⟩ + sign·|10⟩)/√2（sign=−1 が一重項）"""
    if sign not in (1, -1):
        raise ValidationError("符号は +1 か −1 です", field='sign', value=sign)
    vector = np.array([0, 1, sign, 0], dtype=complex) / math.sqrt(2)
    return StateVector(vector, SpaceLayout.qubits(*labels))


def _require_setting(povms: Mapping[Hashable, Povm], setting: Hashable, side: str) -> Povm:
    if setting not in povms:
        raise ValidationError(f"未知の設定です: {side}={setting}", field=f"setting_{side}", value=setting)
    return povms[setting]


def qcm_probability(m: QuantumCausalModel, x: str, y: str, s: Hashable, t: Hashable) -> float:
    """
    量子因果モデルのボルン則 P(x,y|s,t) = tr[(E_A^{x|s} ⊗ E_B^{y|t}) (Λ_A ⊗ Λ_B)(ρ_Λ)]

    Raises:
        ValidationError: 未知の設定・結果の場合
    """
    e_a = _require_setting(m.povm_a, s, 'a').element(x)
    e_b = _require_setting(m.povm_b, t, 'b').element(y)
    operator = embed_operator(np.kron(e_a, e_b), [m.label_a, m.label_b], m.rho_out.layout)
    value = float(np.real(np.trace(operator @ m.rho_out.matrix)))
    return min(max(value, 0.0), 1.0)


def joint_distribution(m: QuantumCausalModel, s: Hashable, t: Hashable) -> Dict[Tuple[str, str], float]:
    """設定 (s, t) での結果の同時分布"""
    povm_a = _require_setting(m.povm_a, s, 'a')
    povm_b = _require_setting(m.povm_b, t, 'b')
    return {(x, y): qcm_probability(m, x, y, s, t) for x in povm_a.outcomes for y in povm_b.outcomes}


def correlator(m: QuantumCausalModel, s: Hashable, t: Hashable) -> float:
    """E(s,t) = Σ x·y P(x,y|s,t)（結果ラベルは ±1）"""
    return float(sum(float(x) * float(y) * p for (x, y), p in joint_distribution(m, s, t).items()))


def chsh(m: QuantumCausalModel, settings: Tuple[Hashable, Hashable, Hashable, Hashable]) -> float:
    """S = E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)"""
    a, a2, b, b2 = settings
    return (correlator(m, a, b) - correlator(m, a, b2)
            + correlator(m, a2, b) + correlator(m, a2, b2))


def chsh_from_correlators(correlators: Mapping[Tuple[int, int], float]) -> float:
    """設定の添字 (0/1, 0/1) ごとの相関から S を組む"""
    return (correlators[(0, 0)] - correlators[(0, 1)]
            + correlators[(1, 0)] + correlators[(1, 1)])


def deterministic_strategies() -> List[Tuple[Tuple[int, int], Tuple[int, int]]]:
    """決定論的戦略の組 (A(x=0), A(x=1)), (B(y=0), B(y=1)) の全列挙（16通り）"""
    responses = list(itertools.product(OUTCOME_VALUES, repeat=2))
    return [(a, b) for a in responses for b in responses]


def strategy_table(strategy: Tuple[Tuple[int, int], Tuple[int, int]]) -> np.ndarray:
    """決定論的戦略の表 P(a,b|x,y,λ)（λ は1点）"""
    responses_a, responses_b = strategy
    table = np.zeros((2, 2, 2, 2, 1))
    for x in range(2):
        for y in range(2):
            table[OUTCOME_VALUES.index(responses_a[x]), OUTCOME_VALUES.index(responses_b[y]), x, y, 0] = 1.0
    return table


def table_correlators(table: np.ndarray, weights: Optional[Sequence[float]] = None) -> Dict[Tuple[int, int], float]:
    """表 P(a,b|x,y,λ) を λ について混ぜた相関 E(x,y)"""
    table = np.asarray(table, dtype=float)
    w = np.full(table.shape[4], 1.0 / table.shape[4]) if weights is None else np.asarray(weights, dtype=float)
    if abs(w.sum() - 1.0) > Tolerances.COMPLETENESS or w.min() < 0:
        raise ValidationError("λ の重みが確率分布ではありません", field='weights', value=w.tolist())
    mixed = np.tensordot(table, w, axes=([4], [0]))  # (a, b, x, y)
    signs = np.outer(OUTCOME_VALUES, OUTCOME_VALUES)
    return {(x, y): float(np.sum(signs * mixed[:, :, x, y])) for x in range(2) for y in range(2)}


def classical_chsh_bound() -> float:
    """
    全ての決定論的戦略での |S| の最大値

    分解可能なモデルは決定論的戦略の凸結合なので、この値が全ての古典モデルの上限になる。
    """
    strategies = deterministic_strategies()
    bound = max(abs(chsh_from_correlators(table_correlators(strategy_table(s)))) for s in strategies)
    logger.info(f"古典的なCHSH上限: {len(strategies)} 戦略を列挙, max|S|={bound:g}")
    return bound


def random_factorizable_mixture(rng: np.random.Generator, n_lambda: int = 4) -> Tuple[np.ndarray, np.ndarray]:
    """
    乱数の分解可能な表 Σ_λ P(λ) P(a|xλ)P(b|yλ)

    Returns:
        (表 (a, b, x, y, λ), λ の重み)
    """
    if n_lambda < 1:
        raise ValidationError("λ の値は1個以上必要です", field='n_lambda', value=n_lambda)
    p_a = rng.dirichlet(np.ones(2), size=(2, n_lambda))  # (x, λ, a)
    p_b = rng.dirichlet(np.ones(2), size=(2, n_lambda))  # (y, λ, b)
    table = np.einsum('xla,ylb->abxyl', p_a, p_b)
    weights = rng.dirichlet(np.ones(n_lambda))
    return table, weights


def probability_table(m: QuantumCausalModel) -> Dict[Tuple[Hashable, Hashable, str, str], float]:
    """全ての設定の組での P(x,y|s,t)"""
    table = {}
    for s in m.settings_a:
        for t in m.settings_b:
            for (x, y), p in joint_distribution(m, s, t).items():
                table[(s, t, x, y)] = p
    return table


def table_to_csv(table: Mapping[Tuple[Hashable, Hashable, str, str], float]) -> str:
    """確率表をCSVへ（列: setting_a, setting_b, outcome_a, outcome_b, probability）"""
    rows: List[List[str]] = [list(TABLE_HEADER)]
    for (s, t, x, y), p in table.items():
        rows.append([str(s), str(t), x, y, f"{p:.12g}"])
    return rows_to_csv(rows)


def table_from_csv(text: str) -> Dict[Tuple[str, str, str, str], float]:
    """CSVから確率表へ（設定は文字列のまま）"""
    rows = csv_to_rows(text)
    if not rows or rows[0] != TABLE_HEADER:
        raise ValidationError("確率表のヘッダが不正です", field='header', value=rows[0] if rows else None)
    table = {}
    for row in rows[1:]:
        if len(row) != len(TABLE_HEADER):
            raise ValidationError("確率表の列数が不正です", field='row', value=row)
        table[(row[0], row[1], row[2], row[3])] = float(row[4])
    return table


def correlator_rows(m: QuantumCausalModel) -> List[List[str]]:
    """相関の表（列: setting_a, setting_b, E）"""
    rows = [['setting_a', 'setting_b', 'E']]
    for s in m.settings_a:
        for t in m.settings_b:
            rows.append([f"{s:.12g}" if isinstance(s, float) else str(s),
                         f"{t:.12g}" if isinstance(t, float) else str(t),
                         f"{correlator(m, s, t):.12g}"])
    return rows


def build_endqt_dag(log: EventLog, wings: Tuple[str, str] = ('A', 'B')) -> StructureGraph:
    """
    EnDQT のベル実験ログから因果構造グラフを作る

    Λ 領域から A, B への発展は不決定構造（UDI）、測定側の SDC から各翼の結果への
    介入は SDI になる。A と B の間には辺を張らない。

    Args:
        log: EnDQT エンジンのイベントログ
        wings: 両翼の系ラベル

    Raises:
        ValidationError: EnDQT 以外のログの場合
    """
    if log.engine != EngineTypes.ENDQT:
        raise ValidationError(f"EnDQT のログではありません: {log.engine or '(不明)'}", field='engine', value=log.engine)
    graph = StructureGraph()
    graph.add_node('Lambda')
    for wing in wings:
        graph.add_node(wing)
    for wing in wings:
        graph.add_interaction('Lambda', wing, EdgeKinds.UDI, 0.0, directed=True)

    events = sorted(log.of_type(EventTypes.DETERMINATE), key=lambda e: (e['t'], e['seq']))
    for event in events:
        target = event.get('system')
        if target not in wings:
            continue
        holder = event['data']['holder']
        outcome = f"{target}_out"
        t = float(event['t'])
        if outcome in graph.nodes:
            continue
        if holder not in graph.nodes:
            graph.add_node(holder, kind=NodeKinds.GENERATOR)
        graph.add_node(outcome)
        graph.add_interaction(target, outcome, EdgeKinds.UDI, t, directed=True)
        graph.add_interaction(holder, outcome, EdgeKinds.SDI, t)
        logger.debug(f"SDC介入: {holder} -> {outcome} (t={t:g})")
    logger.info(f"EnDQT因果構造: ノード {len(graph.nodes)}, 辺 {len(graph.live_edges())}")
    return graph
