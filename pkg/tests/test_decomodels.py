"""
デコヒーレンスモデルと相互作用スケジュールのテスト
"""

import math

import numpy as np
import pytest

import decomodels
from constants import HamiltonianTags
from decomodels import (
    InteractionEntry, InteractionSchedule, SpinEnvironment, dephasing_evidence, evolve_segment, register_hamiltonian,
    record_factor, run_schedule, spin_env_evolve, von_neumann_couple, von_neumann_couple_multilevel,
)
from differentiation import classify_process, environment_overlaps
from exceptions import ScheduleError, ValidationError
from hilbert import PAULI_X, Observable, SpaceLayout, StateVector, embed_operator, tensor
from utils.cache import PropagatorCache


@pytest.fixture
def plus():
    return StateVector.qubit('S', 1, 1)


class TestSpinEnvironment:
    """純位相緩和スピン環境のテストクラス"""

    @pytest.mark.parametrize('n', [1, 3, 6, 10])
    def test_simulation_matches_analytic_overlap(self, plus, n):
        """状態ベクトルの発展と解析解 Π cos(2 g_k t) が一致"""
        env = SpinEnvironment.random(n, np.random.default_rng(n))
        pointer = Observable.pauli_z('S')
        for t in np.linspace(0.0, 5.0, 100):
            joint = spin_env_evolve(plus, env, t)
            simulated = environment_overlaps(joint, 'S', pointer).max_off_diagonal()
            expected = abs(np.prod(np.cos(2 * env.couplings * t)))
            assert simulated == pytest.approx(expected, abs=1e-9)
            assert abs(env.analytic_overlap(t)) == pytest.approx(expected, abs=1e-12)

    def test_initial_state_is_product(self, plus):
        """t=0 では積状態"""
        env = SpinEnvironment([0.3, 0.7])
        joint = spin_env_evolve(plus, env, 0.0)
        assert joint.equals(tensor(plus, env.initial_state()))
        assert abs(env.analytic_overlap(0.0)) == pytest.approx(1.0)

    def test_single_spin_anchor(self, plus):
        """n=1, g=π/8, t=1 で |r| = √2/2"""
        env = SpinEnvironment([math.pi / 8])
        joint = spin_env_evolve(plus, env, 1.0)
        overlap = environment_overlaps(joint, 'S', Observable.pauli_z('S')).max_off_diagonal()
        assert overlap == pytest.approx(math.sqrt(2) / 2, abs=1e-9)

    def test_common_zero(self, plus):
        """等しい結合の10スピンは最初の共通零点で |r| ≈ 0"""
        g = 0.9
        env = SpinEnvironment([g] * 10)
        t = math.pi / (4 * g)
        joint = spin_env_evolve(plus, env, t)
        assert environment_overlaps(joint, 'S', Observable.pauli_z('S')).max_off_diagonal() < 1e-12

    def test_norm_preserved(self, plus):
        """発展はノルムを保存"""
        env = SpinEnvironment.random(8, np.random.default_rng(3))
        for t in (0.1, 1.0, 7.5):
            assert spin_env_evolve(plus, env, t).norm() == pytest.approx(1.0, abs=1e-9)

    def test_rational_couplings_recur(self):
        """有理比の結合は共通周期で1に戻り、可逆と分類される"""
        env = SpinEnvironment([1.0, 2.0])
        assert abs(env.analytic_overlap(math.pi)) == pytest.approx(1.0, abs=1e-6)
        evidence = dephasing_evidence(env, duration=2 * math.pi, samples=401)
        assert not classify_process(evidence, env_size=env.n).is_quasi_irreversible

    def test_large_environment_is_quasi_irreversible(self):
        """大きな環境では重なりが eps 未満に留まる"""
        env = SpinEnvironment.random(64, np.random.default_rng(11))
        evidence = dephasing_evidence(env, duration=1.0, samples=200)
        assert classify_process(evidence, env_size=env.n).is_quasi_irreversible

    def test_negative_time_rejected(self, plus):
        """負の時刻は拒否"""
        with pytest.raises(ValidationError):
            spin_env_evolve(plus, SpinEnvironment([1.0]), -1.0)


class TestVonNeumannCoupling:
    """フォン・ノイマン相互作用のテストクラス"""

    def test_superposition_branches(self, plus):
        """重ね合わせは直交する環境状態と相関する"""
        joint = von_neumann_couple(plus, StateVector.qubit('E', 1, 0))
        assert environment_overlaps(joint, 'S', Observable.pauli_z('S')).max_off_diagonal() < 1e-12

    def test_eigenstate_stays_product(self):
        """固有状態は積状態のまま"""
        joint = von_neumann_couple(StateVector.qubit('S', 1, 0), StateVector.qubit('E', 1, 0))
        expected = tensor(StateVector.qubit('S', 1, 0), StateVector.qubit('E', 1, 0))
        assert joint.equals(expected)

    def test_non_qubit_rejected(self):
        """量子ビット以外は拒否"""
        qutrit = StateVector.basis(SpaceLayout([('S', 3)]), 0)
        with pytest.raises(ValidationError):
            von_neumann_couple(qutrit, StateVector.qubit('E', 1, 0))

    def test_multilevel(self):
        """多準位版はポインタごとに直交する環境状態を作る"""
        layout = SpaceLayout([('S', 3)])
        system = StateVector.normalized([1, 1, 1], layout)
        env_ready = StateVector.basis(SpaceLayout([('E', 3)]), 0)
        joint = von_neumann_couple_multilevel(system, env_ready, Observable.computational('S', 3))
        overlaps = environment_overlaps(joint, 'S', Observable.computational('S', 3))
        assert overlaps.max_off_diagonal() < 1e-12


class TestInteractionSchedule:
    """相互作用スケジュールのテストクラス"""

    @pytest.fixture(autouse=True)
    def setup(self):
        self.layout = SpaceLayout.qubits('S0', 'S1', 'S2')
        self.initial = StateVector.normalized(np.kron(np.kron([1, 1], [1, 0]), [1, 0]), self.layout)

    def test_rejects_invalid_entries(self):
        """開始 ≥ 終了・同一系・未知タグは拒否"""
        with pytest.raises(ScheduleError):
            InteractionSchedule([InteractionEntry(1.0, 1.0, ('S0', 'S1'), HamiltonianTags.DEPHASE)])
        with pytest.raises(ScheduleError):
            InteractionSchedule([InteractionEntry(0.0, 1.0, ('S0', 'S0'), HamiltonianTags.DEPHASE)])
        with pytest.raises(ScheduleError):
            InteractionSchedule([InteractionEntry(0.0, 1.0, ('S0', 'S1'), 'teleport')])

    def test_undeclared_system_rejected(self):
        """未宣言の系を参照するスケジュールは拒否"""
        sched = InteractionSchedule([InteractionEntry(0.0, 1.0, ('S0', 'X'), HamiltonianTags.DEPHASE)])
        with pytest.raises(ScheduleError):
            run_schedule(self.initial, sched, dt=0.1)

    def test_empty_schedule_is_constant(self):
        """空のスケジュールは状態を変えない"""
        trajectory = run_schedule(self.initial, InteractionSchedule(), dt=0.5, t_end=2.0)
        assert trajectory.times == [0.0, 0.5, 1.0, 1.5, 2.0]
        assert all(state.equals(self.initial) for _, state in trajectory)

    def test_sequential_record_chain(self):
        """S0→S1 の記録の後 S1→S2 の記録で三者が相関する"""
        sched = InteractionSchedule([
            InteractionEntry(0.0, 1.0, ('S1', 'S0'), HamiltonianTags.RECORD),
            InteractionEntry(1.0, 2.0, ('S2', 'S1'), HamiltonianTags.RECORD),
        ])
        trajectory = run_schedule(self.initial, sched, dt=0.25)
        expected = StateVector.normalized([1, 0, 0, 0, 0, 0, 0, 1], self.layout)
        assert trajectory.final.equals(expected)
        assert all(state.norm() == pytest.approx(1.0, abs=1e-9) for _, state in trajectory)

    def test_commuting_couplings_commute(self):
        """可換な相互作用は順序によらず同じ終状態"""
        first = InteractionEntry(0.0, 1.0, ('S0', 'S1'), HamiltonianTags.DEPHASE, strength=0.7)
        second = InteractionEntry(1.0, 2.0, ('S1', 'S2'), HamiltonianTags.DEPHASE, strength=1.3)
        swapped_first = InteractionEntry(0.0, 1.0, ('S1', 'S2'), HamiltonianTags.DEPHASE, strength=1.3)
        swapped_second = InteractionEntry(1.0, 2.0, ('S0', 'S1'), HamiltonianTags.DEPHASE, strength=0.7)
        start = StateVector.normalized(np.ones(8), self.layout)
        a = run_schedule(start, InteractionSchedule([first, second]), dt=0.5).final
        b = run_schedule(start, InteractionSchedule([swapped_first, swapped_second]), dt=0.5).final
        assert a.equals(b)

    def test_overlapping_entries_sum(self):
        """重なる区間ではハミルトニアンを足し合わせる"""
        a = InteractionEntry(0.0, 1.0, ('S0', 'S1'), HamiltonianTags.DEPHASE, strength=0.4)
        b = InteractionEntry(0.0, 1.0, ('S1', 'S2'), HamiltonianTags.DEPHASE, strength=0.9)
        start = StateVector.normalized(np.ones(8), self.layout)
        together = run_schedule(start, InteractionSchedule([a, b]), dt=0.5).final
        stepwise = evolve_segment(evolve_segment(start, [a], 0.0, 1.0), [b], 0.0, 1.0)
        assert together.equals(stepwise)

    def test_boundaries(self):
        """区間の境界は全ての開始・終了時刻"""
        sched = InteractionSchedule([
            InteractionEntry(0.5, 1.5, ('S0', 'S1'), HamiltonianTags.DEPHASE),
            InteractionEntry(1.0, 3.0, ('S1', 'S2'), HamiltonianTags.DEPHASE),
        ])
        assert sched.boundaries() == [0.0, 0.5, 1.0, 1.5, 3.0]
        assert sched.boundaries(2.0) == [0.0, 0.5, 1.0, 1.5, 2.0]
        assert [str(e) for e in sched.active(1.0, 1.5)] == [str(e) for e in sched]

    def test_record_factor(self):
        """記録因子があればそれを使う"""
        layout = SpaceLayout.qubits('S1', 'S1.rec')
        assert record_factor(layout, 'S1') == 'S1.rec'
        assert record_factor(self.layout, 'S1') == 'S1'

    def test_propagator_cache_reused(self):
        """同じ区間の伝播演算子は再利用する"""
        cache = PropagatorCache()
        entry = InteractionEntry(0.0, 4.0, ('S0', 'S1'), HamiltonianTags.DEPHASE)
        run_schedule(self.initial, InteractionSchedule([entry]), dt=1.0, cache=cache)
        assert cache.get_stats()['hits'] > 0

    def test_cache_distinguishes_local_hamiltonians(self):
        """同じ因子でも局所ハミルトニアンが違えば別の伝播演算子を使う"""
        cache = PropagatorCache()
        start = StateVector.basis(self.layout, 0)
        flip = {'S0': (math.pi / 2) * PAULI_X}
        idle = {'S0': np.zeros((2, 2))}
        flipped = evolve_segment(start, [], 0.0, 1.0, flip, cache)
        unchanged = evolve_segment(start, [], 0.0, 1.0, idle, cache)
        assert flipped.equals(StateVector.basis(self.layout, 4))
        assert unchanged.equals(start)

    def test_registered_tag_usable(self, monkeypatch):
        """登録したタグはスケジュールで使える"""
        monkeypatch.setattr(decomodels, 'HAMILTONIAN_BUILDERS', dict(decomodels.HAMILTONIAN_BUILDERS))

        def flip_both(entry, layout):
            return (math.pi / 2) * embed_operator(np.kron(PAULI_X, PAULI_X), list(entry.parties), layout)

        register_hamiltonian('flip_both', flip_both)
        sched = InteractionSchedule([InteractionEntry(0.0, 1.0, ('S0', 'S1'), 'flip_both')])
        start = StateVector.basis(self.layout, 0)
        final = run_schedule(start, sched, dt=0.5).final
        assert final.equals(StateVector.basis(self.layout, 6))
