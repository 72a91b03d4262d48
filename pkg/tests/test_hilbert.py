"""
有限次元ヒルベルト空間のテスト

テンソル構造・部分トレース・発展・エントロピー・チャネル・POVMのテスト
"""

import math

import numpy as np
import pytest

from exceptions import DimensionError, ValidationError
from hilbert import (
    Channel, DensityOperator, Observable, Povm, SpaceLayout, StateVector, apply_channel, embed_operator,
    evolve, evolve_local, expm_hermitian, mutual_information, partial_trace, povm_probabilities, random_density,
    random_state, random_unitary, tensor, von_neumann_entropy, PAULI_X, PAULI_Z,
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def bell_pair():
    """(|00⟩ + |11⟩)/√2"""
    return StateVector.normalized([1, 0, 0, 1], SpaceLayout.qubits('A', 'B'))


class TestSpaceLayout:
    """レイアウトのテストクラス"""

    def test_duplicate_labels_rejected(self):
        """ラベルの重複は拒否"""
        with pytest.raises(ValidationError):
            SpaceLayout([('A', 2), ('A', 3)])

    def test_dimensions(self):
        """全体の次元と因子の位置"""
        layout = SpaceLayout([('S', 3), ('E', 2)])
        assert layout.total_dim == 6
        assert layout.index_of('E') == 1
        assert layout.dim_of('S') == 3
        assert 'S' in layout and 'X' not in layout

    def test_unknown_label(self):
        """未知のラベルは拒否"""
        with pytest.raises(ValidationError):
            SpaceLayout.qubits('A').index_of('B')

    def test_concat_clash(self):
        """連結でラベルが重なると拒否"""
        with pytest.raises(ValidationError):
            SpaceLayout.qubits('A').concat(SpaceLayout.qubits('A'))


class TestStates:
    """状態と密度演算子のテストクラス"""

    def test_unnormalized_rejected(self):
        """規格化されていない状態は拒否"""
        with pytest.raises(ValidationError):
            StateVector([1, 1], SpaceLayout.qubits('A'))

    def test_wrong_dimension_rejected(self):
        """次元が合わない状態は拒否"""
        with pytest.raises(DimensionError):
            StateVector([1, 0, 0], SpaceLayout.qubits('A'))

    def test_amplitudes_are_read_only(self):
        """構築後は不変"""
        state = StateVector.qubit('A', 1, 0)
        with pytest.raises(ValueError):
            state.amplitudes[0] = 0

    def test_equals_ignores_global_phase(self):
        """大域位相は区別しない"""
        a = StateVector.qubit('A', 1, 1)
        b = StateVector.normalized(np.array([1, 1]) * np.exp(0.7j), SpaceLayout.qubits('A'))
        assert a.equals(b)
        assert not a.equals(StateVector.qubit('A', 1, -1))

    def test_normalized_handles_tiny_amplitudes(self):
        """非正規化数の大きさの振幅でも規格化できる"""
        state = StateVector.normalized([3e-170, 4e-170], SpaceLayout.qubits('A'))
        np.testing.assert_allclose(np.abs(state.amplitudes), [0.6, 0.8], atol=1e-12)
        with pytest.raises(ValidationError):
            StateVector.normalized([0, 0], SpaceLayout.qubits('A'))

    def test_density_rejects_negative_eigenvalue(self):
        """負の固有値を持つ行列は拒否"""
        with pytest.raises(ValidationError):
            DensityOperator(np.diag([1.5, -0.5]), SpaceLayout.qubits('A'))

    def test_purity(self):
        """純粋状態の純度は1、最大混合は1/d"""
        layout = SpaceLayout([('S', 4)])
        assert StateVector.basis(layout, 2).to_density().purity() == pytest.approx(1.0)
        assert DensityOperator.maximally_mixed(layout).purity() == pytest.approx(0.25)


class TestPartialTrace:
    """部分トレースのテストクラス"""

    def test_bell_pair_marginal_is_mixed(self, bell_pair):
        """ベル対の片方は最大混合"""
        reduced = partial_trace(bell_pair.to_density(), {'A'})
        np.testing.assert_allclose(reduced.matrix, np.eye(2) / 2, atol=1e-12)

    def test_product_state_marginal(self):
        """積状態の片方は元の状態"""
        a = StateVector.qubit('A', 0.6, 0.8)
        b = StateVector.qubit('B', 1, 1j)
        reduced = partial_trace(tensor(a, b).to_density(), {'B'})
        np.testing.assert_allclose(reduced.matrix, b.to_density().matrix, atol=1e-12)

    def test_keeps_original_order(self, rng):
        """残した因子は元の順序"""
        rho = random_density(SpaceLayout([('A', 2), ('B', 3), ('C', 2)]), rng)
        reduced = partial_trace(rho, {'C', 'A'})
        assert reduced.layout.labels == ['A', 'C']
        assert reduced.trace() == pytest.approx(1.0)

    def test_empty_keep_rejected(self, bell_pair):
        """空の集合は拒否"""
        with pytest.raises(ValidationError):
            partial_trace(bell_pair.to_density(), set())


class TestEvolution:
    """発展と演算子の埋め込みのテストクラス"""

    def test_non_unitary_rejected(self):
        """ユニタリでない演算子は拒否"""
        with pytest.raises(ValidationError):
            evolve(StateVector.qubit('A', 1, 0), np.array([[1, 1], [0, 1]]))

    def test_embed_operator_acts_on_target(self):
        """埋め込んだ X は指定因子だけを反転"""
        layout = SpaceLayout.qubits('A', 'B', 'C')
        flipped = evolve(StateVector.basis(layout, 0), embed_operator(PAULI_X, ['B'], layout))
        assert flipped.equals(StateVector.basis(layout, 2))

    def test_embed_respects_target_order(self):
        """targets の順序で演算子が並ぶ"""
        layout = SpaceLayout.qubits('A', 'B')
        op = embed_operator(np.kron(PAULI_Z, np.eye(2)), ['B', 'A'], layout)
        np.testing.assert_allclose(op, np.kron(np.eye(2), PAULI_Z), atol=1e-12)

    def test_expm_hermitian_is_unitary(self, rng):
        """exp(−iHt) はユニタリ"""
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        u = expm_hermitian(g + g.conj().T, 0.37)
        np.testing.assert_allclose(u.conj().T @ u, np.eye(4), atol=1e-10)

    def test_evolve_local_matches_embedded(self, rng):
        """evolve_local は埋め込んだユニタリでの発展と同じ"""
        layout = SpaceLayout.qubits('A', 'B')
        state = random_state(layout, rng)
        u = random_unitary(2, rng)
        expected = evolve(state, embed_operator(u, ['B'], layout))
        assert evolve_local(state, u, ['B']).equals(expected)


class TestEntropy:
    """エントロピーと相互情報量のテストクラス"""

    def test_pure_state_entropy_zero(self, rng):
        """純粋状態のエントロピーは0"""
        state = random_state(SpaceLayout([('S', 5)]), rng)
        assert von_neumann_entropy(state.to_density()) == pytest.approx(0.0, abs=1e-9)

    def test_maximally_mixed_entropy(self):
        """最大混合は ln d"""
        for d in range(2, 9):
            rho = DensityOperator.maximally_mixed(SpaceLayout([('S', d)]))
            assert von_neumann_entropy(rho) == pytest.approx(math.log(d), abs=1e-12)

    def test_mutual_information(self, bell_pair):
        """ベル対は 2 ln 2、積状態は0"""
        assert mutual_information(bell_pair.to_density(), 'A', 'B') == pytest.approx(2 * math.log(2))
        product = tensor(StateVector.qubit('A', 1, 0), StateVector.qubit('B', 1, 1))
        assert mutual_information(product.to_density(), 'A', 'B') == pytest.approx(0.0, abs=1e-9)


class TestObservablesAndPovms:
    """観測量・POVM・チャネルのテストクラス"""

    def test_projectors_group_degenerate_values(self):
        """縮退した固有値は一つの射影子にまとまる"""
        obs = Observable(np.diag([1.0, 1.0, -1.0]), SpaceLayout([('S', 3)]))
        projectors = obs.projectors()
        assert [value for value, _ in projectors] == [-1.0, 1.0]
        assert np.trace(projectors[1][1]).real == pytest.approx(2.0)

    def test_spin_along(self):
        """角度0は σz、角度π/2は σx"""
        np.testing.assert_allclose(Observable.spin_along('A', 0.0).matrix, PAULI_Z, atol=1e-12)
        np.testing.assert_allclose(Observable.spin_along('A', math.pi / 2).matrix, PAULI_X, atol=1e-12)

    def test_incomplete_povm_rejected(self):
        """完全性を満たさないPOVMは拒否"""
        with pytest.raises(ValidationError):
            Povm([('0', np.diag([1.0, 0.0]))])

    def test_povm_probabilities_on_target(self, bell_pair):
        """部分系へのPOVM"""
        probabilities = povm_probabilities(bell_pair.to_density(), Povm.spin_measurement(0.0), ['B'])
        np.testing.assert_allclose(probabilities, [0.5, 0.5], atol=1e-12)

    def test_channel_completeness(self):
        """完全性を満たさないクラウス演算子は拒否"""
        with pytest.raises(ValidationError):
            Channel([np.eye(2) * 0.5])

    def test_depolarizing_channel(self, bell_pair):
        """完全脱分極でベル対は最大混合"""
        out = apply_channel(bell_pair.to_density(), Channel.depolarizing(2), ['A'])
        np.testing.assert_allclose(out.matrix, np.eye(4) / 4, atol=1e-12)

    def test_unitary_channel_matches_evolve(self, rng):
        """ユニタリチャネルは UρU†"""
        layout = SpaceLayout.qubits('A', 'B')
        rho = random_density(layout, rng)
        u = random_unitary(2, rng)
        out = apply_channel(rho, Channel.unitary(u), ['B'])
        expected = evolve(rho, embed_operator(u, ['B'], layout))
        np.testing.assert_allclose(out.matrix, expected.matrix, atol=1e-10)

    def test_projective_povm_from_pauli_x(self):
        """σx の射影測定で |+⟩ は必ず +1"""
        povm = Povm.projective(Observable.pauli_x('A'))
        assert povm.outcomes == ['-1', '1']
        plus = StateVector.qubit('A', 1, 1).to_density()
        np.testing.assert_allclose(povm_probabilities(plus, povm, ['A']), [0.0, 1.0], atol=1e-12)
