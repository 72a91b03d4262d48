"""
GRW自発的収縮エンジンのテスト
"""

import math

import numpy as np
import pytest
from scipy import stats

from constants import EdgeKinds, EngineTypes, EventTypes, StructureClasses
from exceptions import ValidationError
from hilbert import Observable, SpaceLayout, StateVector
from scenarios import _engine_for, epr_bell, run, stern_gerlach
from structures import StructureGraph
from theories import GrwEngine, GrwParams
from theories.base_engine import branch_components
from theories.grw_engine import grw_collapse_propagate, grw_step


@pytest.fixture
def lattice_state():
    """3サイトに重み 0.2 / 0.3 / 0.5 で広がった粒子"""
    amplitudes = np.sqrt([0.2, 0.3, 0.5])
    return StateVector(amplitudes, SpaceLayout([('X', 3)]))


class TestGrwParams:
    """パラメータのテストクラス"""

    def test_invalid_values_rejected(self):
        """非正の収縮率・非正の幅は拒否"""
        with pytest.raises(ValidationError):
            GrwParams(lam=-1.0)
        with pytest.raises(ValidationError):
            GrwParams(lam=0.0)
        with pytest.raises(ValidationError):
            GrwParams(sigma=0.0)
        with pytest.raises(ValidationError):
            GrwParams(amplification={'D': -2})

    def test_rate_uses_amplification(self):
        """収縮率は λ × 粒子数"""
        params = GrwParams(lam=0.5, amplification={'D': 20})
        assert params.rate('D') == pytest.approx(10.0)
        assert params.rate('other') == pytest.approx(0.5)


class TestGrwStep:
    """自発的収縮のステップのテストクラス"""

    def test_zero_rate_never_collapses(self, lattice_state):
        """粒子数 0 の生成子は収縮しない"""
        rng = np.random.default_rng(0)
        state, events = grw_step(lattice_state, {'X': 0.0}, 10.0, rng, GrwParams(lam=50.0))
        assert events == []
        assert state.equals(lattice_state)

    def test_collapse_localizes(self, lattice_state):
        """収縮後は中心のサイトが支配的"""
        rng = np.random.default_rng(1)
        state, events = grw_step(lattice_state, {'X': 1.0}, 1.0, rng, GrwParams(lam=50.0))
        assert events
        assert events[-1].dominant_probability > 0.99
        assert state.probabilities()[events[-1].center] > 0.99

    @pytest.mark.slow
    def test_collapse_counts_are_poisson(self):
        """n 個の生成子の時間 T での収縮回数の平均は λ n T（標準誤差の3倍以内）"""
        rng = np.random.default_rng(2024)
        layout = SpaceLayout([('X', 2), ('Y', 2)])
        state = StateVector.normalized([1, 0, 0, 0], layout)
        lam, duration, trials = 0.5, 2.0, 10_000
        counts = [len(grw_step(state, {'X': 1.0, 'Y': 1.0}, duration, rng, GrwParams(lam=lam))[1])
                  for _ in range(trials)]
        expected = lam * 2 * duration
        standard_error = math.sqrt(expected / trials)
        assert abs(np.mean(counts) - expected) < 3 * standard_error

    @pytest.mark.slow
    def test_collapse_centers_follow_born_weights(self, lattice_state):
        """最初の収縮の中心はボルン則の重みに従う（カイ二乗 p > 0.01）"""
        rng = np.random.default_rng(99)
        centers = []
        while len(centers) < 10_000:
            _, events = grw_step(lattice_state, {'X': 1.0}, 1.0, rng, GrwParams(lam=3.0))
            if events:
                centers.append(events[0].center)
        observed = np.bincount(centers, minlength=3)
        expected = np.array([0.2, 0.3, 0.5]) * len(centers)
        _, p_value = stats.chisquare(observed, expected)
        assert p_value > 0.01

    def test_invalid_dt_rejected(self, lattice_state):
        """dt ≤ 0 は拒否"""
        with pytest.raises(ValidationError):
            grw_step(lattice_state, {'X': 1.0}, 0.0, np.random.default_rng(0), GrwParams())


class TestCollapsePropagation:
    """収縮の相関を通じた伝播のテストクラス"""

    @pytest.fixture(autouse=True)
    def setup(self):
        self.layout = SpaceLayout.qubits('D', 'P', 'S')
        # D が P を、P が S を記録した GHZ 型の状態
        self.prior = StateVector.normalized([1, 0, 0, 0, 0, 0, 0, 1], self.layout)
        self.graph = StructureGraph()
        for label in ('D', 'S'):
            self.graph.add_node(label)
        self.graph.add_node('P', locations=('up', 'down'))
        self.graph.add_interaction('P', 'P', EdgeKinds.POTENTIAL_DESTRUCTION, 0.0)

    def test_collapse_forms_ds(self):
        """収縮した検出器から相関した系が DS に入り、潜在的破壊が昇格する"""
        collapsed = StateVector.normalized([1, 0, 0, 0, 0, 0, 0, 0], self.layout)
        locations = {'P': {1.0: 'up', -1.0: 'down'}}
        _, graph, assigned = grw_collapse_propagate(collapsed, 'D', self.graph, 1.0, prior=self.prior,
                                                    locations=locations)
        assert assigned == {'D': 1.0, 'P': 1.0, 'S': 1.0}
        assert set(graph.components()) == {'DS1'}
        assert graph.node('P').locations == {'up'}
        assert len(graph.live_edges(EdgeKinds.DESTRUCTION)) == 1

    def test_no_dominant_value(self):
        """支配的な値がなければ何も割り当てない"""
        _, graph, assigned = grw_collapse_propagate(self.prior, 'D', self.graph, 1.0, prior=self.prior)
        assert assigned == {}
        assert graph.structure_class('D') == StructureClasses.IS

    def test_negligible_tail_ignored(self):
        """収縮後に残る極小の裾の成分があっても伝播できる"""
        collapsed = StateVector.normalized([1, 0, 0, 0, 0, 0, 0, 1e-160], self.layout)
        locations = {'P': {1.0: 'up', -1.0: 'down'}}
        _, graph, assigned = grw_collapse_propagate(collapsed, 'D', self.graph, 1.0, prior=self.prior,
                                                    locations=locations)
        assert assigned == {'D': 1.0, 'P': 1.0, 'S': 1.0}
        assert graph.node('P').locations == {'up'}

    def test_branch_components_renormalize_tiny_weights(self):
        """重みが非正規化数になる成分も規格化された状態として返す"""
        state = StateVector.normalized([1, 1e-160], SpaceLayout.qubits('D'))
        components = branch_components(state, 'D', Observable.pauli_z('D'), prune=0.0)
        assert [value for value, _, _ in components] == [-1.0, 1.0]
        tail = components[0][2]
        assert tail.norm() == pytest.approx(1.0, abs=1e-12)
        assert tail.equals(StateVector.basis(SpaceLayout.qubits('D'), 1))


class TestGrwEngine:
    """シナリオでのGRWエンジンのテストクラス"""

    @pytest.mark.slow
    def test_stern_gerlach_frequencies(self):
        """等しい重ね合わせは検出器の収縮で約半々に分かれる"""
        report = run(stern_gerlach(), GrwEngine(GrwParams(amplification={'D': 20})), trials=100, seed=5)
        frequencies = report.frequencies('P')
        assert set(frequencies) <= {'1', '-1'}
        assert 0.3 < frequencies.get('1', 0.0) < 0.7
        assert report.statistics['P'].get('undetermined', 0) == 0

    def test_stern_gerlach_graph(self):
        """代表試行のグラフに破壊の辺と収縮イベントがある"""
        report = run(stern_gerlach(), GrwEngine(GrwParams(amplification={'D': 20})), trials=1, seed=3)
        graph = report.graph
        assert graph.live_edges(EdgeKinds.DESTRUCTION)
        assert graph.structure_class('P') == StructureClasses.DS
        assert report.log.of_type(EventTypes.COLLAPSE)
        assert 'digraph G {' in graph.export_dot()

    @pytest.mark.slow
    def test_epr_run_completes(self):
        """EPR/ベル実験でも規格化の誤差で止まらない"""
        scenario = epr_bell(math.pi / 2, math.pi / 4)
        report = run(scenario, _engine_for(scenario, EngineTypes.GRW), trials=400, seed=1894986895)
        assert report.trials == 400
