"""
MWI分岐エンジンのテスト
"""

import numpy as np
import pytest

from causal import singlet_state
from constants import EdgeKinds, MwiVariants, ProcessKinds, StructureClasses
from differentiation import ProcessClass
from exceptions import EngineError, IntegrityError, ValidationError
from hilbert import Observable, partial_trace
from scenarios import epr_bell, run
from structures import StructureGraph
from theories import MwiEngine
from theories.mwi_engine import World, WorldSet, meet_local_worlds, mwi_branch, pair_local_worlds

QUASI_IRREVERSIBLE = ProcessClass(ProcessKinds.QUASI_IRREVERSIBLE, 64, None, 0.0, 0.0)
REVERSIBLE = ProcessClass(ProcessKinds.REVERSIBLE, 1, 1.5, 1.0, 0.0)


@pytest.fixture
def singlet():
    return singlet_state()


@pytest.fixture
def linked_graph():
    """もつれた A, B と無関係な C"""
    graph = StructureGraph()
    for label in ('A', 'B', 'C'):
        graph.add_node(label)
    graph.add_interaction('A', 'B', EdgeKinds.UDI, 0.0, directed=False)
    return graph


class TestWorldSet:
    """世界の集合のテストクラス"""

    def test_weights_must_sum_to_one(self, singlet):
        """重みの和が1でなければ不変条件違反"""
        with pytest.raises(IntegrityError):
            WorldSet([World(0.5, singlet), World(0.4, singlet)])

    def test_empty_rejected(self):
        """空の集合は拒否"""
        with pytest.raises(ValidationError):
            WorldSet([])

    def test_single(self, singlet):
        """分岐していない世界"""
        worlds = WorldSet.single(singlet)
        assert len(worlds) == 1
        assert worlds.weights() == [1.0]


class TestMwiBranch:
    """ポインタ成分ごとの分岐のテストクラス"""

    def test_quasi_local_partners_get_values(self, singlet, linked_graph):
        """QuasiLocal では相手の B にも各世界で反対の値が定まる"""
        worlds = mwi_branch(singlet, 'A', Observable.pauli_z('A'), MwiVariants.QUASI_LOCAL,
                            linked_graph, 1.0, QUASI_IRREVERSIBLE)
        assert len(worlds) == 2
        assert worlds.weights() == pytest.approx([0.5, 0.5])
        assert worlds.total_weight() == pytest.approx(1.0)
        for world in worlds:
            assert world.value('B') == -world.value('A')
            assert world.graph.structure_class('B') == StructureClasses.DS
            assert world.graph.structure_class('C') == StructureClasses.IS
        assert linked_graph.live_edges(EdgeKinds.SDI) == []

    def test_local_leaves_state_unprojected(self, singlet, linked_graph):
        """Local では全体の状態を射影せず、離れた B は値を持たない"""
        worlds = mwi_branch(singlet, 'A', Observable.pauli_z('A'), MwiVariants.LOCAL,
                            linked_graph, 1.0, QUASI_IRREVERSIBLE)
        assert len(worlds) == 2
        rho_b = partial_trace(singlet.to_density(), {'B'}).matrix
        for world in worlds:
            assert world.value('B') is None
            assert world.state.equals(singlet)
            assert np.allclose(partial_trace(world.state.to_density(), {'B'}).matrix, rho_b, atol=1e-10)

    def test_global_links_every_system(self, singlet, linked_graph):
        """Global では同じ世界の全ての系が分岐に加わる"""
        worlds = mwi_branch(singlet, 'A', Observable.pauli_z('A'), MwiVariants.GLOBAL,
                            linked_graph, 1.0, QUASI_IRREVERSIBLE)
        for world in worlds:
            assert world.split == ('A', 'B', 'C')
            assert world.graph.structure_class('C') == StructureClasses.DS

    def test_reversible_does_not_branch(self, singlet, linked_graph):
        """準不可逆でなければ世界は一つのまま"""
        worlds = mwi_branch(singlet, 'A', Observable.pauli_z('A'), MwiVariants.QUASI_LOCAL,
                            linked_graph, 1.0, REVERSIBLE)
        assert len(worlds) == 1
        assert worlds.weights() == [1.0]
        assert mwi_branch(singlet, 'A', Observable.pauli_z('A'), MwiVariants.QUASI_LOCAL,
                          linked_graph, 1.0, None).weights() == [1.0]

    def test_unknown_variant_rejected(self, singlet, linked_graph):
        """未知の変種は拒否"""
        with pytest.raises(ValidationError):
            mwi_branch(singlet, 'A', Observable.pauli_z('A'), 'Partial', linked_graph, 1.0, QUASI_IRREVERSIBLE)


class TestLocalWings:
    """Local 変種の翼の対応のテストクラス"""

    @pytest.fixture(autouse=True)
    def setup(self, singlet, linked_graph):
        self.state = singlet
        self.pointers = {'A': Observable.pauli_z('A'), 'B': Observable.pauli_z('B')}
        self.wing_a = mwi_branch(singlet, 'A', self.pointers['A'], MwiVariants.LOCAL,
                                 linked_graph, 1.0, QUASI_IRREVERSIBLE, observer='Alice')
        self.wing_b = mwi_branch(singlet, 'B', self.pointers['B'], MwiVariants.LOCAL,
                                 linked_graph, 1.0, QUASI_IRREVERSIBLE, observer='Bob')

    def test_pairs_before_meeting(self):
        """出会う前は 2 × 2 の組"""
        pairs = pair_local_worlds(self.wing_a, self.wing_b)
        assert len(pairs) == 4
        assert sum(w for _, _, w in pairs) == pytest.approx(1.0)

    def test_meeting_keeps_consistent_pairs(self):
        """出会ったときに残るのは反相関した組だけ"""
        pairs = meet_local_worlds(self.wing_a, self.wing_b, self.state, self.pointers)
        assert len(pairs) == 2
        for a, b, weight in pairs:
            assert a.value('A') == -b.value('B')
            assert weight == pytest.approx(0.5)


class TestMwiEngine:
    """シナリオでのMWIエンジンのテストクラス"""

    def test_unknown_variant_rejected(self):
        """未知の変種は生成時に拒否"""
        with pytest.raises(EngineError):
            MwiEngine('Partial')

    @pytest.mark.parametrize('variant', [MwiVariants.QUASI_LOCAL, MwiVariants.GLOBAL])
    def test_equal_angles_anticorrelate(self, variant):
        """同じ角度では全ての試行で反相関し、世界は2つ"""
        report = run(epr_bell(0.0, 0.0), MwiEngine(variant), trials=20, seed=4)
        for result in report.results:
            assert result.values['A.pointer'] == -result.values['B.pointer']
        assert report.results[0].extra['world_count'] == 2

    def test_local_wings(self):
        """Local では翼ごとに分岐して世界の組は4つ、全体の状態は分岐しない"""
        report = run(epr_bell(0.0, 0.0), MwiEngine(MwiVariants.LOCAL), trials=10, seed=4)
        for result in report.results:
            assert result.values['A.pointer'] == -result.values['B.pointer']
            populations = partial_trace(result.final_state.to_density(), {'A'}).populations()
            assert populations == pytest.approx([0.5, 0.5], abs=1e-9)
        assert report.results[0].extra['world_count'] == 4
