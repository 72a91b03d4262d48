"""
生成的量子論シミュレータ - 有限次元ヒルベルト空間

このモジュールは以下を提供します：
- 合成系のテンソル構造（SpaceLayout）
- 状態ベクトル・密度演算子・観測量・POVM・量子チャネル
- テンソル積、部分トレース、ユニタリ発展、フォン・ノイマンエントロピー
- チャネル適用とPOVMによる確率計算

全ての値は構築後に不変（配列は書き込み禁止）であり、スレッド間で共有できます。
"""

import logging
import math
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from constants import Tolerances, ErrorMessages
from exceptions import ValidationError, DimensionError

logger = logging.getLogger(__name__)

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def _frozen(array: np.ndarray) -> np.ndarray:
    """書き込み禁止のコピーを返す"""
    result = np.array(array, dtype=complex, copy=True)
    result.setflags(write=False)
    return result


class SpaceLayout:
    """合成ヒルベルト空間のテンソル因子の並び"""

    def __init__(self, factors: Sequence[Tuple[str, int]]):
        """
        レイアウト初期化

        Args:
            factors: (ラベル, 次元) の順序付きリスト
        """
        labels = [label for label, _ in factors]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"{ErrorMessages.LABEL_COLLISION}: {labels}", field='factors', value=labels)
        for label, dim in factors:
            if int(dim) < 1:
                raise ValidationError(f"因子 {label} の次元は正でなければなりません: {dim}", field=label, value=dim)
        self._factors: Tuple[Tuple[str, int], ...] = tuple((str(label), int(dim)) for label, dim in factors)

    @classmethod
    def qubits(cls, *labels: str) -> 'SpaceLayout':
        """全因子が2次元のレイアウトを作成"""
        return cls([(label, 2) for label in labels])

    @property
    def factors(self) -> Tuple[Tuple[str, int], ...]:
        return self._factors

    @property
    def labels(self) -> List[str]:
        return [label for label, _ in self._factors]

    @property
    def dims(self) -> List[int]:
        return [dim for _, dim in self._factors]

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims)) if self._factors else 1

    def __len__(self) -> int:
        return len(self._factors)

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def index_of(self, label: str) -> int:
        """ラベルの因子位置を取得"""
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValidationError(f"{ErrorMessages.UNKNOWN_LABEL}: {label}", field='label', value=label)

    def dim_of(self, label: str) -> int:
        return self._factors[self.index_of(label)][1]

    def concat(self, other: 'SpaceLayout') -> 'SpaceLayout':
        """連結したレイアウトを返す（ラベル重複は拒否）"""
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise ValidationError(f"{ErrorMessages.LABEL_COLLISION}: {sorted(clash)}", field='labels', value=sorted(clash))
        return SpaceLayout(self._factors + other.factors)

    def subset(self, labels: Iterable[str]) -> 'SpaceLayout':
        """指定ラベルのみを元の順序で含むレイアウト"""
        wanted = set(labels)
        for label in wanted:
            self.index_of(label)
        return SpaceLayout([f for f in self._factors if f[0] in wanted])

    def with_dim(self, label: str, dim: int) -> 'SpaceLayout':
        """一つの因子の次元を置き換えたレイアウト"""
        return SpaceLayout([(l, dim if l == label else d) for l, d in self._factors])

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SpaceLayout) and self._factors == other.factors

    def __hash__(self) -> int:
        return hash(self._factors)

    def __repr__(self) -> str:
        inner = ', '.join(f"{label}:{dim}" for label, dim in self._factors)
        return f"SpaceLayout({inner})"


class StateVector:
    """純粋状態 |ψ⟩"""

    def __init__(self, amplitudes: Sequence[complex], layout: SpaceLayout,
                 tol: float = Tolerances.CONSTRUCTION):
        vector = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if vector.shape[0] != layout.total_dim:
            raise DimensionError(ErrorMessages.DIMENSION_MISMATCH, expected=layout.total_dim, actual=vector.shape[0])
        norm = float(np.linalg.norm(vector))
        if abs(norm - 1.0) > tol:
            raise ValidationError(f"{ErrorMessages.NOT_NORMALIZED}: |ψ| = {norm}", field='amplitudes', value=norm)
        self._amplitudes = _frozen(vector)
        self.layout = layout

    @classmethod
    def normalized(cls, amplitudes: Sequence[complex], layout: SpaceLayout) -> 'StateVector':
        """規格化してから作成（非常に小さい振幅でも最大の振幅で割ってから規格化する）"""
        vector = np.asarray(amplitudes, dtype=complex).reshape(-1)
        scale = float(np.max(np.abs(vector))) if vector.size else 0.0
        if scale == 0:
            raise ValidationError("ゼロベクトルは規格化できません", field='amplitudes')
        vector = vector / scale
        return cls(vector / np.linalg.norm(vector), layout)

    @classmethod
    def basis(cls, layout: SpaceLayout, index: int) -> 'StateVector':
        """計算基底状態"""
        vector = np.zeros(layout.total_dim, dtype=complex)
        vector[index] = 1.0
        return cls(vector, layout)

    @classmethod
    def qubit(cls, label: str, alpha: complex, beta: complex) -> 'StateVector':
        """α|0⟩ + β|1⟩"""
        return cls.normalized([alpha, beta], SpaceLayout.qubits(label))

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amplitudes

    @property
    def dim(self) -> int:
        return self._amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self._amplitudes))

    def to_density(self) -> 'DensityOperator':
        """|ψ⟩⟨ψ| を返す"""
        return DensityOperator(np.outer(self._amplitudes, self._amplitudes.conj()), self.layout)

    def probabilities(self) -> np.ndarray:
        """計算基底での確率"""
        return np.abs(self._amplitudes) ** 2

    def inner(self, other: 'StateVector') -> complex:
        """⟨self|other⟩"""
        if other.dim != self.dim:
            raise DimensionError(ErrorMessages.DIMENSION_MISMATCH, expected=self.dim, actual=other.dim)
        return complex(np.vdot(self._amplitudes, other.amplitudes))

    def equals(self, other: 'StateVector', tol: float = Tolerances.ASSERTION) -> bool:
        """射影子 |ψ⟩⟨ψ| が一致するか（大域位相は無視）"""
        if other.layout != self.layout:
            return False
        return abs(abs(self.inner(other)) ** 2 - 1.0) <= tol

    def __repr__(self) -> str:
        return f"StateVector(dim={self.dim}, layout={self.layout})"


class DensityOperator:
    """密度演算子 ρ"""

    def __init__(self, matrix: np.ndarray, layout: SpaceLayout,
                 tol: float = Tolerances.CONSTRUCTION):
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (layout.total_dim, layout.total_dim):
            raise DimensionError(ErrorMessages.DIMENSION_MISMATCH, expected=layout.total_dim, actual=m.shape)
        if np.max(np.abs(m - m.conj().T), initial=0.0) > tol:
            raise ValidationError(ErrorMessages.NOT_HERMITIAN, field='matrix')
        trace = complex(np.trace(m))
        if abs(trace - 1.0) > tol:
            raise ValidationError(f"トレースが1ではありません: {trace}", field='trace', value=trace.real)
        hermitian = (m + m.conj().T) / 2
        eigenvalues = np.linalg.eigvalsh(hermitian)
        if eigenvalues.size and eigenvalues.min() < -tol:
            raise ValidationError(f"負の固有値があります: {eigenvalues.min()}", field='eigenvalues', value=float(eigenvalues.min()))
        self._matrix = _frozen(hermitian)
        self._eigenvalues = eigenvalues
        self._eigenvalues.setflags(write=False)
        self.layout = layout

    @classmethod
    def maximally_mixed(cls, layout: SpaceLayout) -> 'DensityOperator':
        """I/N"""
        n = layout.total_dim
        return cls(np.eye(n, dtype=complex) / n, layout)

    @classmethod
    def diagonal(cls, probabilities: Sequence[float], layout: SpaceLayout) -> 'DensityOperator':
        return cls(np.diag(np.asarray(probabilities, dtype=complex)), layout)

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eigenvalues

    @property
    def dim(self) -> int:
        return self._matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self._matrix).real)

    def purity(self) -> float:
        """tr(ρ²)"""
        return float(np.real(np.trace(self._matrix @ self._matrix)))

    def populations(self) -> np.ndarray:
        """計算基底での対角成分"""
        return np.clip(np.real(np.diag(self._matrix)), 0.0, 1.0)

    def __repr__(self) -> str:
        return f"DensityOperator(dim={self.dim}, layout={self.layout})"


class Observable:
    """エルミート観測量（固有分解をキャッシュ）"""

    def __init__(self, matrix: np.ndarray, layout: SpaceLayout,
                 tol: float = Tolerances.CONSTRUCTION):
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (layout.total_dim, layout.total_dim):
            raise DimensionError(ErrorMessages.DIMENSION_MISMATCH, expected=layout.total_dim, actual=m.shape)
        if np.max(np.abs(m - m.conj().T), initial=0.0) > tol:
            raise ValidationError(ErrorMessages.NOT_HERMITIAN, field='matrix')
        self._matrix = _frozen((m + m.conj().T) / 2)
        eigenvalues, eigenvectors = np.linalg.eigh(self._matrix)
        self._eigenvalues = eigenvalues
        self._eigenvalues.setflags(write=False)
        self._eigenvectors = _frozen(eigenvectors)
        self.layout = layout

    @classmethod
    def pauli_z(cls, label: str) -> 'Observable':
        return cls(PAULI_Z, SpaceLayout.qubits(label))

    @classmethod
    def pauli_x(cls, label: str) -> 'Observable':
        return cls(PAULI_X, SpaceLayout.qubits(label))

    @classmethod
    def computational(cls, label: str, dim: int) -> 'Observable':
        """計算基底に対角な観測量（固有値 0..dim-1、格子位置にも使う）"""
        return cls(np.diag(np.arange(dim, dtype=float)), SpaceLayout([(label, dim)]))

    @classmethod
    def spin_along(cls, label: str, angle: float) -> 'Observable':
        """x–z平面内の角度 angle 方向のスピン cosθ σz + sinθ σx"""
        return cls(math.cos(angle) * PAULI_Z + math.sin(angle) * PAULI_X, SpaceLayout.qubits(label))

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eigenvalues

    @property
    def eigenvectors(self) -> np.ndarray:
        return self._eigenvectors

    def projectors(self, tol: float = 1e-9) -> List[Tuple[float, np.ndarray]]:
        """
        縮退を束ねた固有射影子

        Returns:
            (固有値, 射影子) のリスト（固有値昇順）
        """
        groups: List[Tuple[float, List[int]]] = []
        for index, value in enumerate(self._eigenvalues):
            if groups and abs(value - groups[-1][0]) <= tol:
                groups[-1][1].append(index)
            else:
                groups.append((float(value), [index]))
        result = []
        for value, indices in groups:
            vectors = self._eigenvectors[:, indices]
            result.append((value, vectors @ vectors.conj().T))
        return result

    def lift(self, layout: SpaceLayout) -> 'Observable':
        """恒等演算子とのテンソル積で合成空間へ持ち上げる"""
        if layout == self.layout:
            return self
        matrix = embed_operator(self._matrix, self.layout.labels, layout)
        return Observable(matrix, layout)

    def __repr__(self) -> str:
        return f"Observable(layout={self.layout})"


class Povm:
    """POVM（結果ラベル付きの正値演算子の族）"""

    def __init__(self, elements: Sequence[Tuple[str, np.ndarray]],
                 tol: float = Tolerances.COMPLETENESS):
        if not elements:
            raise ValidationError("POVM要素が空です", field='elements')
        dim = np.asarray(elements[0][1]).shape[0]
        total = np.zeros((dim, dim), dtype=complex)
        frozen = []
        for label, element in elements:
            m = np.asarray(element, dtype=complex)
            if m.shape != (dim, dim):
                raise DimensionError(ErrorMessages.DIMENSION_MISMATCH, expected=(dim, dim), actual=m.shape)
            if np.max(np.abs(m - m.conj().T)) > Tolerances.CONSTRUCTION:
                raise ValidationError(f"POVM要素 {label} がエルミートではありません", field=str(label))
            if np.linalg.eigvalsh(m).min() < -Tolerances.CONSTRUCTION:
                raise ValidationError(f"POVM要素 {label} が半正定値ではありません", field=str(label))
            total += m
            frozen.append((str(label), _frozen(m)))
        if np.max(np.abs(total - np.eye(dim))) > tol:
            raise ValidationError("POVM要素の和が恒等演算子になりません", field='completeness')
        self._elements = tuple(frozen)
        self.dim = dim

    @classmethod
    def projective(cls, observable: Observable) -> 'Povm':
        """観測量の固有射影子によるPOVM（ラベルは固有値）"""
        return cls([(f"{value:g}", projector) for value, projector in observable.projectors()])

    @classmethod
    def spin_measurement(cls, angle: float) -> 'Povm':
        """角度 angle 方向のスピン測定（結果 '+1' / '-1'）"""
        n = math.cos(angle) * PAULI_Z + math.sin(angle) * PAULI_X
        return cls([('+1', (PAULI_I + n) / 2), ('-1', (PAULI_I - n) / 2)])

    @property
    def elements(self) -> Tuple[Tuple[str, np.ndarray], ...]:
        return self._elements

    @property
    def outcomes(self) -> List[str]:
        return [label for label, _ in self._elements]

    def element(self, outcome: str) -> np.ndarray:
        for label, m in self._elements:
            if label == outcome:
                return m
        raise ValidationError(f"未知の結果ラベル: {outcome}", field='outcome', value=outcome)

    def __repr__(self) -> str:
        return f"Povm(outcomes={self.outcomes})"


class Channel:
    """クラウス表現の量子チャネル"""

    def __init__(self, kraus: Sequence[np.ndarray], tol: float = Tolerances.COMPLETENESS):
        if not kraus:
            raise ValidationError("クラウス演算子が空です", field='kraus')
        operators = [np.asarray(k, dtype=complex) for k in kraus]
        shape = operators[0].shape
        if any(k.shape != shape for k in operators):
            raise DimensionError("クラウス演算子の形が揃っていません", expected=shape)
        completeness = sum(k.conj().T @ k for k in operators)
        if np.max(np.abs(completeness - np.eye(shape[1]))) > tol:
            raise ValidationError("完全性 ΣK†K = I を満たしません", field='completeness')
        self._kraus = tuple(_frozen(k) for k in operators)
        self.output_dim, self.input_dim = shape

    @classmethod
    def identity(cls, dim: int) -> 'Channel':
        return cls([np.eye(dim, dtype=complex)])

    @classmethod
    def unitary(cls, u: np.ndarray) -> 'Channel':
        if not is_unitary(u):
            raise ValidationError(ErrorMessages.NOT_UNITARY, field='unitary')
        return cls([u])

    @classmethod
    def depolarizing(cls, dim: int, p: float = 1.0) -> 'Channel':
        """ρ → (1−p)ρ + p·I/d（p=1 で完全脱分極）"""
        if not 0.0 <= p <= 1.0:
            raise ValidationError("脱分極確率は [0,1] でなければなりません", field='p', value=p)
        kraus = [math.sqrt(1 - p) * np.eye(dim, dtype=complex)] if p < 1.0 else []
        for i in range(dim):
            for j in range(dim):
                k = np.zeros((dim, dim), dtype=complex)
                k[i, j] = math.sqrt(p / dim)
                kraus.append(k)
        return cls(kraus)

    @classmethod
    def dephasing(cls, p: float) -> 'Channel':
        """量子ビットの位相緩和 ρ → (1−p)ρ + p ZρZ"""
        if not 0.0 <= p <= 1.0:
            raise ValidationError("位相緩和確率は [0,1] でなければなりません", field='p', value=p)
        return cls([math.sqrt(1 - p) * PAULI_I, math.sqrt(p) * PAULI_Z])

    @property
    def kraus(self) -> Tuple[np.ndarray, ...]:
        return self._kraus

    def __repr__(self) -> str:
        return f"Channel(kraus={len(self._kraus)}, {self.input_dim}->{self.output_dim})"


Tensorable = Union[StateVector, DensityOperator, Observable]


def is_unitary(u: np.ndarray, tol: float = Tolerances.UNITARY) -> bool:
    """U†U = I か判定"""
    m = np.asarray(u, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) <= tol)


def _permute_operator(matrix: np.ndarray, dims: List[int], axes: List[int]) -> np.ndarray:
    """因子の並びを axes で入れ替えた演算子"""
    n = len(dims)
    total = int(np.prod(dims))
    tensor = matrix.reshape(dims + dims)
    tensor = tensor.transpose(axes + [n + a for a in axes])
    return tensor.reshape(total, total)


def embed_operator(op: np.ndarray, targets: Sequence[str], layout: SpaceLayout) -> np.ndarray:
    """
    局所演算子を合成空間に埋め込む

    Args:
        op: targets の順に並んだ因子上の演算子
        targets: 作用する因子ラベル
        layout: 埋め込み先のレイアウト

    Returns:
        layout 全体の行列（他の因子には恒等演算子）
    """
    indices = [layout.index_of(label) for label in targets]
    if len(set(indices)) != len(indices):
        raise ValidationError(ErrorMessages.LABEL_COLLISION, field='targets', value=list(targets))
    target_dim = int(np.prod([layout.dims[i] for i in indices]))
    op = np.asarray(op, dtype=complex)
    if op.shape != (target_dim, target_dim):
        raise DimensionError(ErrorMessages.DIMENSION_MISMATCH, expected=target_dim, actual=op.shape)
    rest = [i for i in range(len(layout)) if i not in indices]
    rest_dim = int(np.prod([layout.dims[i] for i in rest])) if rest else 1
    front = np.kron(op, np.eye(rest_dim, dtype=complex))
    order = indices + rest
    front_dims = [layout.dims[i] for i in order]
    return _permute_operator(front, front_dims, list(np.argsort(order)))


def tensor(a: Tensorable, b: Tensorable) -> Tensorable:
    """
    テンソル積（レイアウトは連結）

    Raises:
        ValidationError: ラベルが重複する場合、または種類が異なる場合
    """
    if type(a) is not type(b):
        raise ValidationError("同じ種類の値同士でなければテンソル積を取れません", field='kind',
                              value=f"{type(a).__name__}/{type(b).__name__}")
    layout = a.layout.concat(b.layout)
    if isinstance(a, StateVector):
        return StateVector(np.kron(a.amplitudes, b.amplitudes), layout)
    if isinstance(a, DensityOperator):
        return DensityOperator(np.kron(a.matrix, b.matrix), layout)
    return Observable(np.kron(a.matrix, b.matrix), layout)


def partial_trace(rho: DensityOperator, keep: Iterable[str]) -> DensityOperator:
    """
    部分トレース

    Args:
        rho: 密度演算子
        keep: 残す因子のラベル（空は不可）

    Returns:
        残した因子（元の順序）上の縮約密度演算子
    """
    keep_set = set(keep)
    if not keep_set:
        raise ValidationError("残す因子が空です", field='keep')
    for label in keep_set:
        rho.layout.index_of(label)
    if keep_set == set(rho.layout.labels):
        return rho
    dims = rho.layout.dims
    n = len(dims)
    tensor_form = rho.matrix.reshape(dims + dims)
    letters = 'abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ'
    if 2 * n > len(letters):
        raise ValidationError("因子が多すぎます", field='layout', value=n)
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    kept = [i for i, label in enumerate(rho.layout.labels) if label in keep_set]
    for i in range(n):
        if i not in kept:
            cols[i] = rows[i]
    expression = ''.join(rows) + ''.join(cols) + '->' + ''.join(rows[i] for i in kept) + ''.join(cols[i] for i in kept)
    reduced = np.einsum(expression, tensor_form)
    kept_layout = rho.layout.subset(keep_set)
    d = kept_layout.total_dim
    return DensityOperator(reduced.reshape(d, d), kept_layout)


def evolve(state: Union[StateVector, DensityOperator], u: np.ndarray) -> Union[StateVector, DensityOperator]:
    """
    ユニタリ発展 U|ψ⟩ または UρU†

    Raises:
        ValidationError: U がユニタリでない、または次元が合わない場合
    """
    m = np.asarray(u, dtype=complex)
    if m.shape != (state.dim, state.dim):
        raise DimensionError(ErrorMessages.DIMENSION_MISMATCH, expected=state.dim, actual=m.shape)
    if not is_unitary(m):
        raise ValidationError(ErrorMessages.NOT_UNITARY, field='unitary')
    if isinstance(state, StateVector):
        vector = m @ state.amplitudes
        return StateVector(vector / np.linalg.norm(vector), state.layout)
    return DensityOperator(m @ state.matrix @ m.conj().T, state.layout)


def evolve_local(state: Union[StateVector, DensityOperator], u: np.ndarray,
                 targets: Sequence[str]) -> Union[StateVector, DensityOperator]:
    """指定因子にのみ作用するユニタリで発展"""
    return evolve(state, embed_operator(u, targets, state.layout))


def von_neumann_entropy(rho: DensityOperator) -> float:
    """
    S(ρ) = −tr(ρ ln ρ)（ナット単位）

    1e-12 未満の固有値は寄与 0 として扱う
    """
    values = rho.eigenvalues
    values = values[values > Tolerances.ENTROPY_CUTOFF]
    return float(max(0.0, -np.sum(values * np.log(values))))


def mutual_information(rho: DensityOperator, a: str, b: str) -> float:
    """二つの因子間の相互情報量 I(a:b)"""
    joint = partial_trace(rho, {a, b})
    return (von_neumann_entropy(partial_trace(rho, {a}))
            + von_neumann_entropy(partial_trace(rho, {b}))
            - von_neumann_entropy(joint))


def apply_channel(rho: DensityOperator, ch: Channel, target: Sequence[str]) -> DensityOperator:
    """
    指定因子にチャネルを適用 Σ K ρ K†

    Args:
        rho: 入力密度演算子
        ch: チャネル
        target: チャネルが作用する因子ラベル（この順で入力空間を構成）

    Returns:
        出力密度演算子（出力次元が変わる場合は単一因子のみ許可）
    """
    targets = list(target)
    indices = [rho.layout.index_of(label) for label in targets]
    target_dim = int(np.prod([rho.layout.dims[i] for i in indices]))
    if ch.input_dim != target_dim:
        raise DimensionError(ErrorMessages.DIMENSION_MISMATCH, expected=target_dim, actual=ch.input_dim)
    if ch.output_dim != ch.input_dim and len(targets) != 1:
        raise DimensionError("次元を変えるチャネルは単一因子にのみ適用できます", expected=1, actual=len(targets))

    dims = rho.layout.dims
    rest = [i for i in range(len(dims)) if i not in indices]
    order = indices + rest
    front_dims = [dims[i] for i in order]
    front = _permute_operator(rho.matrix, dims, order)
    rest_dim = int(np.prod([dims[i] for i in rest])) if rest else 1
    blocks = front.reshape(target_dim, rest_dim, target_dim, rest_dim)
    out = np.zeros((ch.output_dim, rest_dim, ch.output_dim, rest_dim), dtype=complex)
    for k in ch.kraus:
        out += np.einsum('ia,arbs,jb->irjs', k, blocks, k.conj())
    out_front_dims = [ch.output_dim] + front_dims[1:] if len(targets) == 1 else front_dims
    total = ch.output_dim * rest_dim
    result = _permute_operator(out.reshape(total, total), out_front_dims, list(np.argsort(order)))
    layout = rho.layout if ch.output_dim == ch.input_dim else rho.layout.with_dim(targets[0], ch.output_dim)
    output = DensityOperator(result, layout, tol=Tolerances.COMPLETENESS)
    logger.debug(f"チャネル適用: {ch} -> {targets}")
    return output


def povm_probabilities(rho: DensityOperator, povm: Povm,
                       target: Optional[Sequence[str]] = None) -> np.ndarray:
    """
    p_i = tr(E_i ρ)

    Args:
        rho: 密度演算子
        povm: POVM
        target: POVMが作用する因子（省略時は全空間）

    Returns:
        確率ベクトル（[0,1] にクリップ済み）
    """
    if target is not None:
        reduced = partial_trace(rho, set(target))
        matrix = reduced.matrix
        order = [l for l in reduced.layout.labels]
        wanted = list(target)
        if order != wanted:
            axes = [order.index(l) for l in wanted]
            matrix = _permute_operator(matrix, reduced.layout.dims, axes)
    else:
        matrix = rho.matrix
    if matrix.shape[0] != povm.dim:
        raise DimensionError(ErrorMessages.DIMENSION_MISMATCH, expected=matrix.shape[0], actual=povm.dim)
    probabilities = np.array([np.real(np.trace(element @ matrix)) for _, element in povm.elements])
    if probabilities.min() < -Tolerances.CONSTRUCTION or probabilities.max() > 1 + Tolerances.CONSTRUCTION:
        raise ValidationError("確率が [0,1] から外れました", field='probabilities', value=probabilities.tolist())
    probabilities = np.clip(probabilities, 0.0, 1.0)
    if abs(probabilities.sum() - 1.0) > Tolerances.COMPLETENESS:
        raise ValidationError("確率の和が1ではありません", field='probabilities', value=float(probabilities.sum()))
    return probabilities


def random_state(layout: SpaceLayout, rng: np.random.Generator) -> StateVector:
    """ハール的な乱数純粋状態（テスト・検証用）"""
    vector = rng.normal(size=layout.total_dim) + 1j * rng.normal(size=layout.total_dim)
    return StateVector.normalized(vector, layout)


def random_density(layout: SpaceLayout, rng: np.random.Generator, rank: Optional[int] = None) -> DensityOperator:
    """乱数混合状態（ジニブル行列から作成）"""
    n = layout.total_dim
    k = rank or n
    g = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    m = g @ g.conj().T
    return DensityOperator(m / np.trace(m), layout)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """QR分解による乱数ユニタリ"""
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_channel(dim: int, rng: np.random.Generator, n_kraus: int = 3) -> Channel:
    """スタインスプリング拡大による乱数チャネル"""
    u = random_unitary(dim * n_kraus, rng)
    isometry = u[:, :dim]
    kraus = [isometry[i * dim:(i + 1) * dim, :] for i in range(n_kraus)]
    return Channel(kraus)


def expm_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    """exp(−iHt)"""
    return scipy.linalg.expm(-1j * np.asarray(h, dtype=complex) * t)
