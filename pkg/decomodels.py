"""
生成的量子論シミュレータ - デコヒーレンスモデル

このモジュールは以下を提供します：
- フォン・ノイマン相互作用（2準位／多準位）
- 純位相緩和のスピン環境モデル H = σz_sys ⊗ Σ_k g_k σz_k
- 相互作用スケジュールと区間ごとの厳密な時間発展
"""

import hashlib
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from constants import DefaultValues, HamiltonianTags, Tolerances
from differentiation import OverlapMatrix, degree_of_differentiation
from exceptions import DimensionError, ScheduleError, ValidationError
from hilbert import (
    PAULI_I, PAULI_X, PAULI_Y, PAULI_Z,
    Observable, SpaceLayout, StateVector,
    embed_operator, evolve, partial_trace, tensor,
)
from utils.cache import PropagatorCache

logger = logging.getLogger(__name__)

# 状態ベクトルで直接シミュレーションする環境量子ビット数の上限
MAX_SIMULATED_QUBITS = 20

class SpinEnvironment:
    """純位相緩和を起こすスピン環境"""

    def __init__(self, couplings: Sequence[float],
                 initial: Optional[Sequence[Tuple[complex, complex]]] = None,
                 prefix: str = 'E'):
        """
        スピン環境の初期化

        Args:
            couplings: 各環境量子ビットの結合定数 g_k
            initial: 各量子ビットの初期状態 (a_k, b_k)（省略時は |+⟩）
            prefix: 因子ラベルの接頭辞
        """
        g = np.asarray(couplings, dtype=float).reshape(-1)
        if g.size < 1:
            raise ValidationError("環境量子ビットは1個以上必要です", field='n', value=int(g.size))
        if not np.all(np.isfinite(g)):
            raise ValidationError("結合定数が有限ではありません", field='couplings', value=g.tolist())
        if initial is None:
            amplitudes = np.full((g.size, 2), 1 / math.sqrt(2), dtype=complex)
        else:
            amplitudes = np.asarray(initial, dtype=complex)
            if amplitudes.shape != (g.size, 2):
                raise DimensionError("初期状態の数が結合定数と一致しません", expected=(g.size, 2), actual=amplitudes.shape)
            norms = np.linalg.norm(amplitudes, axis=1)
            if np.any(norms == 0):
                raise ValidationError("初期状態にゼロベクトルがあります", field='initial')
            amplitudes = amplitudes / norms[:, None]
        g.setflags(write=False)
        amplitudes.setflags(write=False)
        self.couplings = g
        self.initial = amplitudes
        self.prefix = prefix

    @classmethod
    def random(cls, n: int, rng: np.random.Generator,
               low: float = DefaultValues.COUPLING_LOW,
               high: float = DefaultValues.COUPLING_HIGH,
               prefix: str = 'E') -> 'SpinEnvironment':
        """結合定数を一様分布 U[low, high] から引いた環境"""
        if n < 1:
            raise ValidationError("環境量子ビットは1個以上必要です", field='n', value=n)
        return cls(rng.uniform(low, high, size=n), prefix=prefix)

    @property
    def n(self) -> int:
        return int(self.couplings.size)

    @property
    def labels(self) -> List[str]:
        return [f"{self.prefix}{k + 1}" for k in range(self.n)]

    @property
    def layout(self) -> SpaceLayout:
        return SpaceLayout.qubits(*self.labels)

    def initial_state(self) -> StateVector:
        """環境の初期積状態"""
        vector = np.ones(1, dtype=complex)
        for a, b in self.initial:
            vector = np.kron(vector, np.array([a, b]))
        return StateVector(vector, self.layout)

    def analytic_overlap(self, t: float) -> complex:
        """
        ⟨E_↑(t)|E_↓(t)⟩ の解析解

        系が |↑⟩ のとき各量子ビットは exp(−i g_k t σz)、|↓⟩ のとき exp(+i g_k t σz) で回るため
        r(t) = Π_k (|a_k|² e^{2i g_k t} + |b_k|² e^{−2i g_k t})。|+⟩ 環境では Π_k cos(2 g_k t)。
        """
        a2 = np.abs(self.initial[:, 0]) ** 2
        b2 = np.abs(self.initial[:, 1]) ** 2
        phase = 2j * self.couplings * t
        return complex(np.prod(a2 * np.exp(phase) + b2 * np.exp(-phase)))

    def overlap_series(self, times: Iterable[float]) -> List[OverlapMatrix]:
        """各時刻の二値ポインタ重なり行列"""
        return [OverlapMatrix.two_outcome(t, self.analytic_overlap(t)) for t in times]

    def __repr__(self) -> str:
        return f"SpinEnvironment(n={self.n}, prefix={self.prefix!r})"


def _orthonormal_partners(ready: np.ndarray, count: int) -> np.ndarray:
    """ready を先頭とする count 本の正規直交ベクトル（列）"""
    dim = ready.shape[0]
    if count > dim:
        raise DimensionError("環境の次元がポインタの数より小さいです", expected=count, actual=dim)
    vectors = [ready / np.linalg.norm(ready)]
    for j in range(dim):
        if len(vectors) == count:
            break
        candidate = np.zeros(dim, dtype=complex)
        candidate[j] = 1.0
        for v in vectors:
            candidate = candidate - np.vdot(v, candidate) * v
        norm = np.linalg.norm(candidate)
        if norm > 1e-8:
            vectors.append(candidate / norm)
    return np.stack(vectors, axis=1)


def von_neumann_couple_multilevel(system: StateVector, env_ready: StateVector,
                                  pointer_basis: Observable) -> StateVector:
    """
    多準位のフォン・ノイマン相互作用 Σ_i c_i |p_i⟩|E_0⟩ → Σ_i c_i |p_i⟩|E_i⟩

    Args:
        system: 系の状態（単一因子）
        env_ready: 環境の準備状態 |E_0⟩
        pointer_basis: 系のポインタ観測量（固有ベクトルがポインタ状態）

    Returns:
        系⊗環境の結合状態（⟨E_i|E_l⟩ = δ_il）
    """
    if len(system.layout) != 1:
        raise ValidationError("系は単一因子でなければなりません", field='system', value=system.layout.labels)
    if pointer_basis.layout.total_dim != system.dim:
        raise DimensionError("ポインタ基底の次元が系と一致しません", expected=system.dim, actual=pointer_basis.layout.total_dim)
    basis = pointer_basis.eigenvectors
    coefficients = basis.conj().T @ system.amplitudes
    partners = _orthonormal_partners(env_ready.amplitudes, system.dim)
    joint = np.zeros(system.dim * env_ready.dim, dtype=complex)
    for i, c in enumerate(coefficients):
        joint += c * np.kron(basis[:, i], partners[:, i])
    return StateVector(joint, system.layout.concat(env_ready.layout), tol=Tolerances.COMPLETENESS)


def von_neumann_couple(system: StateVector, env_ready: StateVector) -> StateVector:
    """
    量子ビットのフォン・ノイマン相互作用

    (α|↑⟩ + β|↓⟩)|E_0⟩ → α|↑⟩|E_↑⟩ + β|↓⟩|E_↓⟩、|E_↑⟩ = |E_0⟩, ⟨E_↑|E_↓⟩ = 0

    Raises:
        ValidationError: 系が量子ビットでない場合
    """
    if system.layout.dims != [2]:
        raise ValidationError("量子ビット以外はポインタ基底を指定して多準位版を使ってください",
                              field='system', value=system.layout.dims)
    if env_ready.dim < 2:
        raise DimensionError("環境は2次元以上必要です", expected=2, actual=env_ready.dim)
    partners = _orthonormal_partners(env_ready.amplitudes, 2)
    alpha, beta = system.amplitudes
    joint = alpha * np.kron([1, 0], partners[:, 0]) + beta * np.kron([0, 1], partners[:, 1])
    return StateVector(joint, system.layout.concat(env_ready.layout), tol=Tolerances.COMPLETENESS)


def spin_env_evolve(sys_state: StateVector, env: SpinEnvironment, t: float) -> StateVector:
    """
    純位相緩和モデルでの時間発展

    H = σz_sys ⊗ Σ_k g_k σz_k は計算基底で対角なので、
    各基底成分に位相 exp(−i t z_s Σ_k g_k z_k) を掛けるだけで厳密に発展できる。

    Args:
        sys_state: 系の量子ビット状態
        env: スピン環境
        t: 時刻（≥ 0）

    Returns:
        系⊗環境の結合状態
    """
    if t < 0:
        raise ValidationError("時刻は非負でなければなりません", field='t', value=t)
    if sys_state.layout.dims != [2]:
        raise ValidationError("系は量子ビットでなければなりません", field='system', value=sys_state.layout.dims)
    if env.n > MAX_SIMULATED_QUBITS:
        raise ValidationError(f"環境が大きすぎます（{MAX_SIMULATED_QUBITS} 量子ビットまで）。analytic_overlap を使ってください",
                              field='n', value=env.n)
    joint = tensor(sys_state, env.initial_state())
    signs = np.array([1.0, -1.0])
    env_field = np.zeros(1)
    for g in env.couplings:
        env_field = (env_field[:, None] + g * signs[None, :]).reshape(-1)
    energies = (signs[:, None] * env_field[None, :]).reshape(-1)
    vector = joint.amplitudes * np.exp(-1j * energies * t)
    logger.debug(f"スピン環境で発展: n={env.n}, t={t:.6g}")
    return StateVector(vector, joint.layout, tol=Tolerances.COMPLETENESS)


def dephasing_evidence(env: SpinEnvironment, duration: float,
                       samples: int = 200) -> List[OverlapMatrix]:
    """
    相互作用区間 [0, duration] のデコヒーレンスの根拠（解析的な重なりの時系列）

    Args:
        env: 相手側を表すスピン環境
        duration: 相互作用の長さ
        samples: サンプル数
    """
    if duration <= 0:
        raise ValidationError("相互作用の長さは正でなければなりません", field='duration', value=duration)
    return env.overlap_series(np.linspace(0.0, duration, samples))


@dataclass(frozen=True)
class InteractionEntry:
    """相互作用スケジュールの1項目"""
    start: float
    end: float
    parties: Tuple[str, str]
    tag: str
    strength: Optional[float] = None
    angle: float = 0.0

    @property
    def duration(self) -> float:
        return self.end - self.start

    def involves(self, label: str) -> bool:
        return label in self.parties

    def active_during(self, t0: float, t1: float) -> bool:
        """区間 [t0, t1] の全体で有効か"""
        return self.start <= t0 + Tolerances.CONSTRUCTION and self.end >= t1 - Tolerances.CONSTRUCTION

    def hamiltonian(self, layout: SpaceLayout) -> np.ndarray:
        """全空間でのハミルトニアン"""
        builder = HAMILTONIAN_BUILDERS.get(self.tag)
        if builder is None:
            raise ScheduleError(f"未知のハミルトニアンタグです: {self.tag}", tag=self.tag, entry=self.to_dict())
        return builder(self, layout)

    def to_dict(self) -> dict:
        return {
            'start': self.start,
            'end': self.end,
            'parties': list(self.parties),
            'tag': self.tag,
            'strength': self.strength,
            'angle': self.angle,
        }

    def __str__(self) -> str:
        text = f"{self.parties[0]}-{self.parties[1]}:{self.tag}[{self.start:g},{self.end:g}]"
        if self.strength is not None:
            text += f" g={self.strength:.12g}"
        if self.angle:
            text += f" θ={self.angle:.12g}"
        return text


def record_factor(layout: SpaceLayout, holder: str) -> str:
    """holder の記録因子（'<holder>.rec' があればそれ、なければポインタ因子自身）"""
    rec = f"{holder}.rec"
    return rec if rec in layout else holder


def _record_hamiltonian(entry: InteractionEntry, layout: SpaceLayout) -> np.ndarray:
    # 標的が角度 angle 方向の −1 固有状態のとき記録因子を σy で回す（既定強度で区間末に完全な記録）
    holder, target = entry.parties
    strength = entry.strength if entry.strength is not None else math.pi / (2 * entry.duration)
    rec = record_factor(layout, holder)
    minus = (PAULI_I - math.cos(entry.angle) * PAULI_Z - math.sin(entry.angle) * PAULI_X) / 2
    return strength * embed_operator(np.kron(minus, PAULI_Y), [target, rec], layout)


def _dephase_hamiltonian(entry: InteractionEntry, layout: SpaceLayout) -> np.ndarray:
    strength = entry.strength if entry.strength is not None else 1.0
    return strength * embed_operator(np.kron(PAULI_Z, PAULI_Z), list(entry.parties), layout)


def _disturb_hamiltonian(entry: InteractionEntry, layout: SpaceLayout) -> np.ndarray:
    strength = entry.strength if entry.strength is not None else 1.0
    return strength * embed_operator(np.kron(PAULI_X, PAULI_Z), list(entry.parties), layout)


def _exchange_hamiltonian(entry: InteractionEntry, layout: SpaceLayout) -> np.ndarray:
    strength = entry.strength if entry.strength is not None else 1.0
    xy = (np.kron(PAULI_X, PAULI_X) + np.kron(PAULI_Y, PAULI_Y)) / 2
    return strength * embed_operator(xy, list(entry.parties), layout)


HamiltonianBuilder = Callable[[InteractionEntry, SpaceLayout], np.ndarray]

HAMILTONIAN_BUILDERS: Dict[str, HamiltonianBuilder] = {
    HamiltonianTags.RECORD: _record_hamiltonian,
    HamiltonianTags.DEPHASE: _dephase_hamiltonian,
    HamiltonianTags.DISTURB: _disturb_hamiltonian,
    HamiltonianTags.EXCHANGE: _exchange_hamiltonian,
}


def register_hamiltonian(tag: str, builder: HamiltonianBuilder) -> None:
    """ハミルトニアンタグを登録"""
    HAMILTONIAN_BUILDERS[tag] = builder
    logger.info(f"ハミルトニアンタグを登録: {tag}")


class InteractionSchedule:
    """開始時刻順の相互作用スケジュール"""

    def __init__(self, entries: Iterable[InteractionEntry] = ()):
        items = list(entries)
        for entry in items:
            if entry.start < 0:
                raise ScheduleError(f"開始時刻が負です: {entry}", tag=entry.tag, entry=entry.to_dict())
            if not entry.start < entry.end:
                raise ScheduleError(f"開始時刻が終了時刻以上です: {entry}", tag=entry.tag, entry=entry.to_dict())
            if entry.parties[0] == entry.parties[1]:
                raise ScheduleError(f"相互作用の当事者が同じ系です: {entry}", tag=entry.tag, entry=entry.to_dict())
            if entry.tag not in HAMILTONIAN_BUILDERS:
                raise ScheduleError(f"未知のハミルトニアンタグです: {entry.tag}", tag=entry.tag, entry=entry.to_dict())
        self.entries: Tuple[InteractionEntry, ...] = tuple(sorted(items, key=lambda e: e.start))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[InteractionEntry]:
        return iter(self.entries)

    @property
    def end_time(self) -> float:
        return max((e.end for e in self.entries), default=0.0)

    def systems(self) -> List[str]:
        """スケジュールに現れる系ラベル"""
        seen: List[str] = []
        for entry in self.entries:
            for label in entry.parties:
                if label not in seen:
                    seen.append(label)
        return seen

    def boundaries(self, t_end: Optional[float] = None) -> List[float]:
        """区間の境界（全ての開始・終了時刻と 0）"""
        points = {0.0}
        for entry in self.entries:
            points.add(entry.start)
            points.add(entry.end)
        if t_end is not None:
            points.add(t_end)
            points = {p for p in points if p <= t_end}
        return sorted(points)

    def active(self, t0: float, t1: float) -> List[InteractionEntry]:
        """区間 [t0, t1] で有効な項目"""
        return [e for e in self.entries if e.active_during(t0, t1)]

    def validate_layout(self, layout: SpaceLayout) -> None:
        """全ての当事者がレイアウトに存在するか確認"""
        for entry in self.entries:
            for label in entry.parties:
                if label not in layout:
                    raise ScheduleError(f"スケジュールが未宣言の系を参照しています: {label}",
                                        tag=entry.tag, entry=entry.to_dict())

    def to_dict(self) -> List[dict]:
        return [e.to_dict() for e in self.entries]


class Trajectory:
    """時刻付きの状態列"""

    def __init__(self):
        self.times: List[float] = []
        self.states: List[StateVector] = []

    def append(self, t: float, state: StateVector) -> None:
        self.times.append(float(t))
        self.states.append(state)

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self) -> Iterator[Tuple[float, StateVector]]:
        return iter(zip(self.times, self.states))

    @property
    def final(self) -> StateVector:
        return self.states[-1]

    def to_csv_rows(self, systems: Optional[Sequence[str]] = None) -> List[List[str]]:
        """CSV行（t, norm, 各系の D*）"""
        if not self.states:
            return [['t', 'norm']]
        layout = self.states[0].layout
        labels = list(systems) if systems is not None else [l for l, d in layout.factors if d >= 2]
        rows = [['t', 'norm'] + [f"D*({label})" for label in labels]]
        for t, state in self:
            rho = state.to_density()
            degrees = [degree_of_differentiation(partial_trace(rho, {label})) for label in labels]
            rows.append([f"{t:.12g}", f"{state.norm():.12g}"] + [f"{d:.12g}" for d in degrees])
        return rows


def total_hamiltonian(entries: Sequence[InteractionEntry], layout: SpaceLayout,
                      self_hamiltonians: Optional[Dict[str, np.ndarray]] = None) -> np.ndarray:
    """有効な相互作用と自己ハミルトニアンの和"""
    h = np.zeros((layout.total_dim, layout.total_dim), dtype=complex)
    for entry in entries:
        h += entry.hamiltonian(layout)
    for label, local in (self_hamiltonians or {}).items():
        h += embed_operator(local, [label], layout)
    return h


def _matrix_digest(matrix: np.ndarray) -> str:
    data = np.ascontiguousarray(matrix, dtype=complex)
    return hashlib.sha1(repr(data.shape).encode() + data.tobytes()).hexdigest()


def evolve_segment(state: StateVector, entries: Sequence[InteractionEntry], t0: float, t1: float,
                   self_hamiltonians: Optional[Dict[str, np.ndarray]] = None,
                   cache: Optional[PropagatorCache] = None) -> StateVector:
    """
    区間 [t0, t1] を有効な相互作用の和で厳密に発展

    Args:
        state: 区間開始時の状態
        entries: 区間全体で有効な項目
        t0: 区間開始
        t1: 区間終了
        self_hamiltonians: 因子ラベル → 局所ハミルトニアン
        cache: 伝播演算子キャッシュ
    """
    duration = t1 - t0
    if duration < 0:
        raise ValidationError("区間の終了が開始より前です", field='t1', value=t1)
    if duration == 0 or (not entries and not self_hamiltonians):
        return state
    h = total_hamiltonian(entries, state.layout, self_hamiltonians)
    local_terms = tuple((label, _matrix_digest(local))
                        for label, local in sorted((self_hamiltonians or {}).items()))
    key = (tuple(str(e) for e in entries), local_terms, state.layout)
    if cache is None:
        cache = PropagatorCache()
    u = cache.propagator(key, h, duration)
    return evolve(state, u)


def run_schedule(initial: StateVector, sched: InteractionSchedule, dt: float,
                 t_end: Optional[float] = None,
                 self_hamiltonians: Optional[Dict[str, np.ndarray]] = None,
                 cache: Optional[PropagatorCache] = None) -> Trajectory:
    """
    スケジュールに従って区間ごとに発展し dt ごとにサンプリング

    重なる項目のハミルトニアンは足し合わせる。区間内は行列指数関数で厳密に発展し、
    dt はサンプリング間隔としてのみ使う。

    Args:
        initial: 初期状態
        sched: 相互作用スケジュール
        dt: サンプリング間隔（> 0）
        t_end: 終了時刻（省略時はスケジュールの最終終了時刻）
        self_hamiltonians: 因子ラベル → 局所ハミルトニアン
        cache: 伝播演算子キャッシュ

    Returns:
        Trajectory: 時刻 0, dt, 2dt, ... と t_end の状態
    """
    if not dt > 0:
        raise ValidationError("dt は正でなければなりません", field='dt', value=dt)
    sched.validate_layout(initial.layout)
    final_time = sched.end_time if t_end is None else t_end
    cache = cache or PropagatorCache()

    steps = int(math.floor(final_time / dt + 1e-9))
    sample_times = [k * dt for k in range(steps + 1)]
    if final_time - sample_times[-1] > 1e-12:
        sample_times.append(final_time)

    trajectory = Trajectory()
    boundaries = sched.boundaries(final_time)
    if boundaries[-1] < final_time:
        boundaries.append(final_time)
    state = initial
    trajectory.append(0.0, state)
    pending = iter(sample_times[1:])
    next_sample = next(pending, None)
    for t0, t1 in zip(boundaries, boundaries[1:]):
        entries = sched.active(t0, t1)
        while next_sample is not None and next_sample <= t1 + 1e-12:
            trajectory.append(next_sample, evolve_segment(state, entries, t0, next_sample, self_hamiltonians, cache))
            next_sample = next(pending, None)
        state = evolve_segment(state, entries, t0, t1, self_hamiltonians, cache)
    logger.debug(f"スケジュール実行完了: {len(sched)} 項目, {len(trajectory)} サンプル, cache={cache.get_stats()}")
    return trajectory
