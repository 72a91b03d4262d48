"""
分化度と過程分類のテスト
"""

import math

import numpy as np
import pytest

from constants import ProcessKinds
from decomodels import von_neumann_couple
from differentiation import (
    DifferentiationReport, OverlapMatrix, classify_process, commutativity_check, degree_of_differentiation,
    environment_overlaps, stable_degree,
)
from exceptions import ValidationError
from hilbert import (
    DensityOperator, Observable, SpaceLayout, StateVector, embed_operator, evolve, partial_trace,
    random_unitary, PAULI_X, PAULI_Z,
)


def binary_entropy_degree(p: float) -> float:
    return -(p * math.log(p) + (1 - p) * math.log(1 - p)) / math.log(2)


class TestDegreeOfDifferentiation:
    """D* = S(ρ)/ln N のテストクラス"""

    @pytest.mark.parametrize('dim', range(2, 9))
    def test_pure_and_maximally_mixed_anchors(self, dim):
        """純粋状態は0、最大混合は1"""
        layout = SpaceLayout([('S', dim)])
        pure = StateVector.basis(layout, dim - 1).to_density()
        assert degree_of_differentiation(pure) == pytest.approx(0.0, abs=1e-9)
        assert degree_of_differentiation(DensityOperator.maximally_mixed(layout)) == pytest.approx(1.0, abs=1e-9)

    def test_partial_populations(self):
        """diag(3/4, 1/4) は約0.8113"""
        rho = DensityOperator.diagonal([0.75, 0.25], SpaceLayout.qubits('S'))
        assert degree_of_differentiation(rho) == pytest.approx(0.8113, abs=1e-4)

    def test_one_dimensional_rejected(self):
        """1次元の系は拒否"""
        rho = DensityOperator.maximally_mixed(SpaceLayout([('S', 1)]))
        with pytest.raises(ValidationError):
            degree_of_differentiation(rho)

    def test_invariant_under_environment_unitary(self):
        """環境側だけのユニタリで D* は変わらない"""
        rng = np.random.default_rng(7)
        layout = SpaceLayout([('S', 2), ('E', 3)])
        state = StateVector.normalized(rng.normal(size=6) + 1j * rng.normal(size=6), layout)
        before = degree_of_differentiation(partial_trace(state.to_density(), {'S'}))
        rotated = evolve(state, embed_operator(random_unitary(3, rng), ['E'], layout))
        after = degree_of_differentiation(partial_trace(rotated.to_density(), {'S'}))
        assert after == pytest.approx(before, abs=1e-9)


class TestEnvironmentOverlaps:
    """環境の条件付き状態の重なりのテストクラス"""

    @pytest.fixture(autouse=True)
    def setup(self):
        self.pointer = Observable.pauli_z('S')
        self.env_ready = StateVector.qubit('E', 1, 0)

    def test_product_state_has_unit_overlap(self):
        """積状態は非対角成分1"""
        joint = StateVector.normalized([1, 0, 1, 0], SpaceLayout.qubits('S', 'E'))
        overlaps = environment_overlaps(joint, 'S', self.pointer)
        assert abs(overlaps.entries[0, 1]) == pytest.approx(1.0, abs=1e-9)

    def test_von_neumann_coupling_is_orthogonal(self):
        """フォン・ノイマン相互作用の後は非対角成分0"""
        joint = von_neumann_couple(StateVector.qubit('S', 1, 1), self.env_ready)
        assert environment_overlaps(joint, 'S', self.pointer).max_off_diagonal() < 1e-12
        reduced = partial_trace(joint.to_density(), {'S'})
        assert degree_of_differentiation(reduced) == pytest.approx(1.0, abs=1e-9)

    def test_engineered_overlap(self):
        """条件付き状態の内積が 0.6 になる状態"""
        e_up = np.array([1.0, 0.0])
        e_down = np.array([0.6, 0.8])
        amplitudes = (np.kron([1, 0], e_up) + np.kron([0, 1], e_down)) / math.sqrt(2)
        joint = StateVector(amplitudes, SpaceLayout.qubits('S', 'E'))
        overlaps = environment_overlaps(joint, 'S', self.pointer)
        assert overlaps.max_off_diagonal() == pytest.approx(0.6, abs=1e-9)

    def test_absent_component(self):
        """振幅のない成分は欠落として扱う"""
        joint = von_neumann_couple(StateVector.qubit('S', 1, 0), self.env_ready)
        overlaps = environment_overlaps(joint, 'S', self.pointer)
        assert overlaps.present.tolist().count(True) == 1
        assert overlaps.max_off_diagonal() == 0.0
        degree = degree_of_differentiation(partial_trace(joint.to_density(), {'S'}))
        assert degree == pytest.approx(0.0, abs=1e-9)

    def test_missing_system_rejected(self):
        """存在しない系は拒否"""
        joint = von_neumann_couple(StateVector.qubit('S', 1, 1), self.env_ready)
        with pytest.raises(ValidationError):
            environment_overlaps(joint, 'X', self.pointer)

    def test_overlap_matrix_checks_diagonal(self):
        """対角成分が1でない重なり行列は拒否"""
        with pytest.raises(ValidationError):
            OverlapMatrix(0.0, np.array([[0.5, 0.0], [0.0, 1.0]]), [True, True])


class TestCommutativity:
    """可換性の基準のテストクラス"""

    @pytest.fixture(autouse=True)
    def setup(self):
        self.layout = SpaceLayout.qubits('S', 'E')
        self.h_se = Observable(np.kron(PAULI_Z, PAULI_Z), self.layout)

    def test_commuting_pair(self):
        """σz⊗σz と σz は可換"""
        passes, residual = commutativity_check(self.h_se, Observable.pauli_z('S'))
        assert passes
        assert residual == pytest.approx(0.0, abs=1e-12)

    def test_anticommuting_pair(self):
        """σz⊗σz と σx は非可換"""
        passes, residual = commutativity_check(self.h_se, Observable(PAULI_X, SpaceLayout.qubits('S')))
        assert not passes
        assert residual > 0.1

    def test_position_diagonal_hamiltonian(self):
        """位置で対角な衝突モデルは位置と可換"""
        sites = 6
        layout = SpaceLayout([('S', sites), ('E', 2)])
        h = np.kron(np.diag(np.arange(sites, dtype=float)), PAULI_X)
        position = Observable(np.diag(np.arange(sites, dtype=float)), SpaceLayout([('S', sites)]))
        passes, _ = commutativity_check(Observable(h, layout), position, tol=1e-8)
        assert passes


class TestClassifyProcess:
    """可逆／準不可逆の分類のテストクラス"""

    def test_decaying_overlap_with_large_environment(self):
        """十分大きな環境で重なりが減衰すれば準不可逆"""
        series = [OverlapMatrix.two_outcome(t, math.exp(-t)) for t in np.linspace(0, 20, 201)]
        result = classify_process(series, env_size=12)
        assert result.kind == ProcessKinds.QUASI_IRREVERSIBLE
        assert result.window_max < 1e-3

    def test_small_environment_is_reversible(self):
        """環境が小さければ減衰していても可逆"""
        series = [OverlapMatrix.two_outcome(t, math.exp(-t)) for t in np.linspace(0, 20, 201)]
        assert classify_process(series, env_size=4).kind == ProcessKinds.REVERSIBLE

    def test_single_spin_recurrence(self):
        """単一スピンの重なり cos(2t) は再帰して可逆"""
        series = [OverlapMatrix.two_outcome(t, math.cos(2 * t)) for t in np.linspace(0, math.pi, 201)]
        result = classify_process(series, env_size=1)
        assert result.kind == ProcessKinds.REVERSIBLE
        assert result.recurrence_estimate == pytest.approx(math.pi / 2, abs=0.02)

    def test_constant_overlap(self):
        """相互作用がなければ可逆"""
        series = [OverlapMatrix.two_outcome(t, 1.0) for t in range(10)]
        result = classify_process(series, env_size=64)
        assert not result.is_quasi_irreversible

    def test_empty_series_rejected(self):
        """空の系列は拒否"""
        with pytest.raises(ValidationError):
            classify_process([], env_size=12)

    def test_unordered_series_rejected(self):
        """時刻順でない系列は拒否"""
        series = [OverlapMatrix.two_outcome(1.0, 0.5), OverlapMatrix.two_outcome(0.0, 0.5)]
        with pytest.raises(ValidationError):
            classify_process(series, env_size=12)


class TestStableDegree:
    """安定した分化度のテストクラス"""

    def _report(self, values):
        report = DifferentiationReport('pointer', 'S')
        for k, value in enumerate(values):
            report.add_sample(0.1 * k, value)
        return report

    def test_converging_to_one(self):
        """1に収束する系列"""
        report = self._report([1 - math.exp(-0.5 * k) for k in range(100)])
        assert stable_degree(report) == pytest.approx(1.0, abs=1e-3)
        assert report.stable

    def test_oscillating_series(self):
        """振動する系列は安定しない"""
        report = self._report([0.5 + 0.4 * math.sin(k) for k in range(100)])
        assert stable_degree(report) is None
        assert not report.stable

    def test_partial_distinguishability(self):
        """一定の重なりを持つモデルは中間値に収束"""
        overlap = 0.8
        expected = binary_entropy_degree((1 + overlap) / 2)
        report = self._report([expected] * 50)
        assert stable_degree(report) == pytest.approx(expected, abs=1e-12)
        assert 0.4 < expected < 0.5

    def test_samples_must_increase(self):
        """時刻が単調増加でないサンプルは拒否"""
        report = DifferentiationReport('pointer', 'S')
        report.add_sample(1.0, 0.2)
        with pytest.raises(ValidationError):
            report.add_sample(1.0, 0.3)

    def test_csv_rows(self):
        """CSV行はヘッダ付き"""
        report = self._report([0.0, 0.5])
        rows = report.to_csv_rows()
        assert rows[0] == ['t', 'D*']
        assert rows[2] == ['0.1', '0.5']
