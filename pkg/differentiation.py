"""
生成的量子論シミュレータ - 分化度の計算

このモジュールは以下を提供します：
- 縮約密度演算子から分化度 D* = S(ρ_S)/ln N を計算
- 環境の条件付き状態の重なり行列 ⟨E_i(t)|E_l(t)⟩
- ポインタ基底の可換性判定 [H_SE, O_S] ≈ 0
- デコヒーレンス過程の可逆／準不可逆の分類
- 安定した分化度の判定
"""

import logging
import math
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from constants import DefaultValues, ProcessKinds, Tolerances
from exceptions import ValidationError, DimensionError
from hilbert import (
    DensityOperator, Observable, StateVector,
    embed_operator, partial_trace, von_neumann_entropy,
)

logger = logging.getLogger(__name__)


class OverlapMatrix:
    """時刻 t における環境の条件付き状態の重なり行列"""

    def __init__(self, time: float, entries: np.ndarray, present: Sequence[bool],
                 amplitudes: Optional[Sequence[complex]] = None):
        m = np.array(entries, dtype=complex, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError("重なり行列は正方でなければなりません", actual=m.shape)
        present_mask = np.asarray(present, dtype=bool)
        for i in range(m.shape[0]):
            if present_mask[i] and abs(m[i, i] - 1.0) > Tolerances.COMPLETENESS:
                raise ValidationError(f"対角成分が1ではありません: O[{i}][{i}] = {m[i, i]}", field='entries')
        if np.max(np.abs(m - m.conj().T), initial=0.0) > Tolerances.COMPLETENESS:
            raise ValidationError("重なり行列がエルミートではありません", field='entries')
        m.setflags(write=False)
        self.time = float(time)
        self.entries = m
        self.present = present_mask
        self.amplitudes = np.asarray(amplitudes, dtype=complex) if amplitudes is not None else None

    @classmethod
    def two_outcome(cls, time: float, overlap: complex) -> 'OverlapMatrix':
        """二値ポインタの重なり行列 [[1, r], [r*, 1]]"""
        r = complex(overlap)
        return cls(time, np.array([[1.0, r], [r.conjugate(), 1.0]]), [True, True])

    def max_off_diagonal(self) -> float:
        """存在する成分間の非対角成分の最大絶対値"""
        n = self.entries.shape[0]
        best = 0.0
        for i in range(n):
            for l in range(i + 1, n):
                if self.present[i] and self.present[l]:
                    best = max(best, abs(self.entries[i, l]))
        return best

    def __repr__(self) -> str:
        return f"OverlapMatrix(t={self.time:g}, max_off={self.max_off_diagonal():.3g})"


class DifferentiationReport:
    """分化度 D*(P,S,ST,t) の時系列"""

    def __init__(self, property_label: str, system_label: str, region: str = ''):
        self.property_label = property_label
        self.system_label = system_label
        self.region = region
        self.samples: List[Tuple[float, float]] = []
        self.converged_value: Optional[float] = None
        self.stable = False

    def add_sample(self, t: float, degree: float) -> None:
        """サンプルを追加（時刻は狭義単調増加）"""
        if self.samples and t <= self.samples[-1][0]:
            raise ValidationError(f"サンプル時刻が単調増加ではありません: {t}", field='t', value=t)
        if not -Tolerances.COMPLETENESS <= degree <= 1 + Tolerances.COMPLETENESS:
            raise ValidationError(f"D* が [0,1] の外です: {degree}", field='degree', value=degree)
        self.samples.append((float(t), float(degree)))

    def times(self) -> List[float]:
        return [t for t, _ in self.samples]

    def values(self) -> List[float]:
        return [d for _, d in self.samples]

    def to_csv_rows(self) -> List[List[str]]:
        """CSV行 (t, D*) をヘッダ付きで返す"""
        rows = [['t', 'D*']]
        rows.extend([f"{t:.12g}", f"{d:.12g}"] for t, d in self.samples)
        return rows

    def to_dict(self) -> dict:
        return {
            'property': self.property_label,
            'system': self.system_label,
            'region': self.region,
            'samples': [[t, d] for t, d in self.samples],
            'converged_value': self.converged_value,
            'stable': self.stable,
        }

    def __repr__(self) -> str:
        return (f"DifferentiationReport(P={self.property_label}, S={self.system_label}, "
                f"ST={self.region}, n={len(self.samples)}, stable={self.stable})")


class ProcessClass:
    """デコヒーレンス過程の分類とその根拠"""

    def __init__(self, kind: str, env_size: int, recurrence_estimate: Optional[float],
                 window_max: float, window_start: float):
        self.kind = kind
        self.env_size = env_size
        self.recurrence_estimate = recurrence_estimate
        self.window_max = window_max
        self.window_start = window_start

    @property
    def is_quasi_irreversible(self) -> bool:
        return self.kind == ProcessKinds.QUASI_IRREVERSIBLE

    def evidence(self) -> dict:
        return {
            'env_size': self.env_size,
            'recurrence_estimate': self.recurrence_estimate,
            'window_max': self.window_max,
            'window_start': self.window_start,
        }

    def __repr__(self) -> str:
        return f"ProcessClass({self.kind}, env_size={self.env_size}, window_max={self.window_max:.3g})"


def degree_of_differentiation(rho_s: DensityOperator) -> float:
    """
    D* = S(ρ_S)/ln N

    Args:
        rho_s: 系の縮約密度演算子（N = 次元 ≥ 2）

    Returns:
        [0,1] にクリップした分化度
    """
    n = rho_s.dim
    if n < 2:
        raise ValidationError("1次元の系には分化度を定義できません (ln 1 = 0)", field='dimension', value=n)
    degree = von_neumann_entropy(rho_s) / math.log(n)
    return float(min(1.0, max(0.0, degree)))


def environment_overlaps(joint: StateVector, system: str, pointer_basis: Observable,
                         time: float = 0.0) -> OverlapMatrix:
    """
    環境の条件付き状態の重なり行列

    結合状態を Σ_i α_i |s_i⟩⊗|E_i⟩ とポインタ固有基底で分解し、
    規格化した |E_i⟩ 同士の内積を返す。

    Args:
        joint: 結合状態
        system: 系の因子ラベル
        pointer_basis: 系の因子上のポインタ観測量
        time: 記録する時刻
    """
    layout = joint.layout
    index = layout.index_of(system)
    dim = layout.dims[index]
    if pointer_basis.layout.total_dim != dim:
        raise DimensionError("ポインタ基底の次元が系と一致しません", expected=dim, actual=pointer_basis.layout.total_dim)

    # 系を先頭に並べ替え、行列 (系, 環境) に整形
    axes = [index] + [i for i in range(len(layout)) if i != index]
    psi = joint.amplitudes.reshape(layout.dims).transpose(axes).reshape(dim, -1)
    components = pointer_basis.eigenvectors.conj().T @ psi  # 行 i が α_i |E_i⟩

    amplitudes = np.linalg.norm(components, axis=1)
    present = amplitudes >= Tolerances.ABSENT_AMPLITUDE
    env_states = np.zeros_like(components)
    for i in range(dim):
        if present[i]:
            env_states[i] = components[i] / amplitudes[i]
    entries = env_states.conj() @ env_states.T
    for i in range(dim):
        if not present[i]:
            entries[i, :] = 0.0
            entries[:, i] = 0.0
            entries[i, i] = 1.0
    return OverlapMatrix(time, entries, present, amplitudes)


def commutativity_check(h_se: Observable, o_s: Observable,
                        tol: float = Tolerances.ASSERTION) -> Tuple[bool, float]:
    """
    可換性の基準 [H_SE, O_S] ≈ 0

    Args:
        h_se: 相互作用ハミルトニアン
        o_s: 系の観測量（結合空間へ未持ち上げなら恒等演算子で持ち上げる）
        tol: 許容する相対残差

    Returns:
        (判定, 残差 = ‖[H,O]‖_F / ‖H‖_F)
    """
    if o_s.layout != h_se.layout:
        if not set(o_s.layout.labels) <= set(h_se.layout.labels):
            raise DimensionError("観測量の因子が相互作用の空間に含まれていません",
                                 expected=h_se.layout.labels, actual=o_s.layout.labels)
        o_matrix = embed_operator(o_s.matrix, o_s.layout.labels, h_se.layout)
    else:
        o_matrix = o_s.matrix
    h = h_se.matrix
    norm_h = np.linalg.norm(h)
    if norm_h == 0:
        return True, 0.0
    residual = float(np.linalg.norm(h @ o_matrix - o_matrix @ h) / norm_h)
    return residual <= tol, residual


def classify_process(overlaps: Sequence[OverlapMatrix], env_size: int,
                     eps: float = DefaultValues.STABILITY_EPS,
                     window: float = DefaultValues.STABILITY_WINDOW,
                     size_threshold: int = DefaultValues.SIZE_THRESHOLD) -> ProcessClass:
    """
    可逆／準不可逆の分類

    準不可逆 ⇔ 末尾の窓（全区間の window 割合）で非対角成分が常に eps 未満
    かつ 環境の大きさ ≥ size_threshold

    Args:
        overlaps: 時刻順の重なり行列の系列
        env_size: 環境の部分系の数
        eps: 重なりの閾値
        window: 末尾窓の割合 (0,1]
        size_threshold: 準不可逆とみなす環境の最小サイズ
    """
    if not overlaps:
        raise ValidationError("重なり行列の系列が空です", field='overlaps')
    if not 0.0 < window <= 1.0:
        raise ValidationError("window は (0,1] の割合で指定してください", field='window', value=window)
    times = [o.time for o in overlaps]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValidationError("重なり行列が時刻順ではありません", field='overlaps')

    magnitudes = [o.max_off_diagonal() for o in overlaps]
    span = times[-1] - times[0]
    window_start = times[-1] - window * span
    trailing = [m for t, m in zip(times, magnitudes) if t >= window_start]
    window_max = max(trailing)

    # 一度 eps 未満に落ちた後で 1−eps 以上に戻った最初の時刻
    recurrence = None
    dropped = False
    for t, m in zip(times, magnitudes):
        if m < eps:
            dropped = True
        elif dropped and m >= 1.0 - eps:
            recurrence = t
            break

    if env_size >= size_threshold and window_max < eps:
        kind = ProcessKinds.QUASI_IRREVERSIBLE
    else:
        kind = ProcessKinds.REVERSIBLE
    result = ProcessClass(kind, env_size, recurrence, window_max, window_start)
    logger.debug(f"過程の分類: {result}")
    return result


def stable_degree(report: DifferentiationReport,
                  eps: float = DefaultValues.STABILITY_EPS,
                  window: float = DefaultValues.STABILITY_WINDOW) -> Optional[float]:
    """
    安定した分化度

    末尾窓のサンプルが互いに eps 未満の差に収まれば最後の値を返す。
    収束した場合は report の converged_value / stable も更新する。
    """
    if not report.samples:
        raise ValidationError("分化度レポートが空です", field='samples')
    times = report.times()
    span = times[-1] - times[0]
    start = times[-1] - window * span
    trailing = [d for t, d in report.samples if t >= start]
    if max(trailing) - min(trailing) < eps:
        report.converged_value = trailing[-1]
        report.stable = True
        return trailing[-1]
    report.converged_value = None
    report.stable = False
    return None


def differentiation_report(trajectory: Iterable[Tuple[float, StateVector]], system: str,
                           property_label: str = 'pointer', region: str = '') -> DifferentiationReport:
    """軌跡から D* の時系列を作成"""
    report = DifferentiationReport(property_label, system, region)
    for t, state in trajectory:
        rho_s = partial_trace(state.to_density(), {system})
        report.add_sample(t, degree_of_differentiation(rho_s))
    return report


def overlap_series(trajectory: Iterable[Tuple[float, StateVector]], system: str,
                   pointer_basis: Observable) -> List[OverlapMatrix]:
    """軌跡の各時刻の重なり行列"""
    return [environment_overlaps(state, system, pointer_basis, time=t) for t, state in trajectory]
