"""
シナリオ・実行・設定ファイル・検証スイートのテスト
"""

import math
from pathlib import Path

import pytest
from scipy.stats import chisquare

from constants import (
    EngineTypes, FilePaths, MwiVariants, OutputFormats, ProcessKinds, SamplingModes, ScenarioNames, StructureClasses,
    VerifySuites,
)
from exceptions import ConfigError, ValidationError
from scenarios import (
    RunSettings, _engine_for, bell_statistics, compute_evidence, epr_bell, is_monotone, load_config,
    matches_joint_distribution, no_signalling_check, parameter_sweep, run, sdc_chain, stern_gerlach, verify_suite,
    weak_measurement, weak_sweep,
)
from theories import GrwEngine, GrwParams, MwiEngine
from theories.base_engine import joint_components

SCENARIO_DIR = Path(__file__).resolve().parent.parent / 'data' / 'scenarios'


def read_config(name: str) -> str:
    return (SCENARIO_DIR / name).read_text(encoding='utf-8')


class TestScenarioBuilders:
    """標準シナリオのテストクラス"""

    def test_stern_gerlach_graph(self):
        """経路は2つの場所と潜在的破壊の自己辺を持つ"""
        scenario = stern_gerlach()
        graph = scenario.initial_graph()
        assert graph.has_potential_destruction('P')
        assert graph.node('P').locations == {'up', 'down'}
        assert scenario.t_end == pytest.approx(3.0)

    def test_sdc_chain_variants(self):
        """入れ替えた連鎖は S0–S1 の終了後に始まる"""
        assert sdc_chain().parameters['s2_start'] == pytest.approx(0.8)
        assert sdc_chain(permuted=True).parameters['s2_start'] == pytest.approx(1.2)
        with pytest.raises(ValidationError):
            sdc_chain(s2_start=-0.1)

    def test_weak_measurement_rejects_negative_coupling(self):
        """負の結合は拒否"""
        with pytest.raises(ValidationError):
            weak_measurement(-0.1)

    def test_systems_start_undifferentiated(self):
        """既定では全ての系が IS から始まり、指定した系だけ DS から始まる"""
        scenario = epr_bell()
        assert all(scenario.initial_graph().structure_class(label) == StructureClasses.IS
                   for label in scenario.systems)
        scenario.mark_differentiated(['A'])
        graph = scenario.initial_graph()
        assert graph.structure_class('A') == StructureClasses.DS
        assert graph.structure_class('B') == StructureClasses.IS
        with pytest.raises(ValidationError):
            scenario.mark_differentiated(['Z'])

    def test_evidence_for_epr(self):
        """大きな環境の記録は準不可逆"""
        evidence = compute_evidence(epr_bell(), RunSettings())
        assert {p.kind for p in evidence.values()} == {ProcessKinds.QUASI_IRREVERSIBLE}

    def test_evidence_for_small_environment(self):
        """環境の大きさ1の記録は可逆"""
        evidence = compute_evidence(sdc_chain(orthogonal=False), RunSettings())
        assert {p.kind for p in evidence.values()} == {ProcessKinds.REVERSIBLE}


class TestRun:
    """実行のテストクラス"""

    def test_same_seed_same_log(self):
        """同じ seed ならイベントログはバイト単位で一致"""
        first = run(stern_gerlach(), GrwEngine(GrwParams(amplification={'D': 20})), trials=5, seed=12)
        second = run(stern_gerlach(), GrwEngine(GrwParams(amplification={'D': 20})), trials=5, seed=12)
        assert first.log.to_jsonl() == second.log.to_jsonl()
        assert first.statistics == second.statistics

    def test_workers_do_not_change_results(self):
        """並列に実行しても結果は同じ"""
        scenario = epr_bell(0.0, math.pi / 3)
        serial = run(scenario, MwiEngine(), trials=8, seed=5)
        parallel = run(scenario, MwiEngine(), trials=8, seed=5, settings=RunSettings(workers=3))
        assert serial.log.to_jsonl() == parallel.log.to_jsonl()

    def test_invalid_trials(self):
        """試行回数は1以上"""
        with pytest.raises(ValidationError):
            run(epr_bell(), MwiEngine(), trials=0)

    def test_bundle_files(self):
        """出力にはイベントログ・要約・集計・グラフが含まれる"""
        report = run(epr_bell(), MwiEngine(MwiVariants.GLOBAL), trials=3, seed=1)
        bundle = report.to_bundle(OutputFormats.JSON)
        expected = {FilePaths.EVENT_LOG, "summary.json", f"{FilePaths.STATISTICS}.json", FilePaths.GRAPH}
        assert expected <= set(bundle.files)
        assert report.summary()['trials'] == 3
        assert sum(report.statistics['A'].values()) == 3

    def test_differentiation_reports(self):
        """代表試行の軌跡から集計対象の系の D* を記録する"""
        report = run(weak_measurement(math.pi / 2), MwiEngine(), trials=1, seed=1)
        degrees = report.reports[0].values()
        assert degrees[0] == pytest.approx(0.0, abs=1e-9)
        assert degrees[-1] == pytest.approx(1.0, abs=1e-9)


class TestWeakSweep:
    """弱測定スイープのテストクラス"""

    def test_monotone_with_exact_endpoints(self):
        """D* は増加、可視度は減少し、両端は 0 と 1"""
        grid = [k * math.pi / 20 for k in range(11)]
        rows = weak_sweep(grid)
        assert is_monotone(rows)
        assert rows[0]['degree'] == pytest.approx(0.0, abs=1e-9)
        assert rows[0]['visibility'] == pytest.approx(1.0, abs=1e-9)
        assert rows[-1]['degree'] == pytest.approx(1.0, abs=1e-9)
        assert rows[-1]['visibility'] == pytest.approx(0.0, abs=1e-9)
        for row in rows:
            assert row['overlap'] == pytest.approx(abs(math.cos(row['strength'])), abs=1e-9)

    def test_empty_grid_rejected(self):
        """空のグリッドは拒否"""
        with pytest.raises(ValidationError):
            weak_sweep([])

    def test_non_monotone_detected(self):
        """減少する D* は単調ではない"""
        rows = [{'degree': 0.5, 'visibility': 0.5}, {'degree': 0.4, 'visibility': 0.4}]
        assert not is_monotone(rows)


class TestBellStatistics:
    """ベル統計のテストクラス"""

    def test_quantum_violation(self):
        """最適な角度で |S| は 2√2 に近く、2 を超える"""
        angles = (0.0, math.pi / 2, math.pi / 4, 3 * math.pi / 4)
        stats = bell_statistics(EngineTypes.ENDQT, angles, trials=4000, seed=7)
        assert stats['chsh'] < 0
        assert stats['chsh_abs'] == pytest.approx(2 * math.sqrt(2), abs=0.15)
        assert stats['chsh_abs'] > 2
        assert set(stats['correlators']) == {'0,0', '0,1', '1,0', '1,1'}
        assert all(sum(table.values()) == 4000 for table in stats['counts'].values())

    def test_no_signalling(self):
        """A の周辺分布は B の設定によらない"""
        angles = (0.0, math.pi / 2, math.pi / 4, 3 * math.pi / 4)
        stats = bell_statistics(EngineTypes.MWI, angles, trials=4000, seed=11)
        holds, worst = no_signalling_check(stats['counts'])
        assert holds
        assert worst < 4.0

    def test_signalling_detected(self):
        """周辺分布が設定で変わる表は検出する"""
        counts = {'0,0': {'1,1': 900, '-1,-1': 100}, '0,1': {'1,1': 100, '-1,-1': 900}}
        holds, _ = no_signalling_check(counts)
        assert not holds

    def test_exact_trials(self):
        """全試行をエンジンで実行しても両翼に値が出る"""
        angles = (0.0, math.pi / 2, 0.0, math.pi / 2)
        stats = bell_statistics(EngineTypes.MWI, angles, trials=10, seed=3,
                                variant=MwiVariants.QUASI_LOCAL, exact_trials=True)
        assert stats['correlators']['0,0'] == pytest.approx(-1.0)
        assert all(sum(table.values()) == 10 for table in stats['counts'].values())

    def test_angle_count_checked(self):
        """角度は4つ"""
        with pytest.raises(ValidationError):
            bell_statistics(EngineTypes.MWI, (0.0, 1.0), trials=10)

    def test_joint_distribution_check(self):
        """ボルン則と整合する表だけを受け入れる"""
        scenario = epr_bell(0.0, 0.0)
        components = joint_components(scenario.initial_state(), ['A', 'B'],
                                      [scenario.pointers['A'], scenario.pointers['B']], prune=0.0)
        assert matches_joint_distribution({(1, -1): 205, (-1, 1): 195}, 400, components)[0]
        # 一重項では同じ値は出ない
        uncorrelated = {(1, 1): 100, (1, -1): 100, (-1, 1): 100, (-1, -1): 100}
        assert not matches_joint_distribution(uncorrelated, 400, components)[0]
        assert not matches_joint_distribution({(1, -1): 390, (-1, 1): 10}, 400, components)[0]
        # 両翼の値が出なかった試行がある
        assert not matches_joint_distribution({(1, -1): 200, (-1, 1): 190}, 400, components)[0]

    @pytest.mark.slow
    def test_relational_runs_every_trial(self):
        """同時分布と整合しないエンジンは全試行をエンジンの結果で数える"""
        angles = (0.0, math.pi / 2, math.pi / 4, 3 * math.pi / 4)
        stats = bell_statistics(EngineTypes.RELATIONAL, angles, trials=600, seed=3)
        assert set(stats['sampling'].values()) == {SamplingModes.ENGINE}
        assert stats['chsh_abs'] < 1.0
        assert all(sum(table.values()) <= 600 for table in stats['counts'].values())

    @pytest.mark.slow
    def test_grw_uses_engine_outcomes(self):
        """GRW でも試行はエンジンで実行され、最後まで走る"""
        angles = (0.0, math.pi / 2, math.pi / 4, 3 * math.pi / 4)
        stats = bell_statistics(EngineTypes.GRW, angles, trials=400, seed=3)
        assert set(stats['sampling'].values()) == {SamplingModes.ENGINE}
        for table in stats['counts'].values():
            assert set(table) <= {'1,1', '1,-1', '-1,1', '-1,-1'}


class TestEngineAgreement:
    """一つの系を一度測るシナリオでのエンジン間の一致のテストクラス"""

    @pytest.mark.slow
    @pytest.mark.parametrize('engine_type', EngineTypes.get_all())
    def test_stern_gerlach_born_frequencies(self, engine_type):
        """どのエンジンでも経路の値の頻度はボルン則に従う"""
        theta = math.pi / 3
        scenario = stern_gerlach(theta)
        report = run(scenario, _engine_for(scenario, engine_type), trials=400, seed=17)
        counts = report.statistics['P']
        assert counts.get('undetermined', 0) == 0
        observed = [counts.get('1', 0), counts.get('-1', 0)]
        born = [math.cos(theta / 2) ** 2, math.sin(theta / 2) ** 2]
        result = chisquare(observed, [p * sum(observed) for p in born])
        assert result.pvalue > 0.01


class TestLoadConfig:
    """設定ファイルの読み込みのテストクラス"""

    def test_bundled_configs_load(self):
        """同梱の設定ファイルは全て読み込める"""
        for path in sorted(SCENARIO_DIR.glob('*.cfg')):
            config = load_config(path.read_text(encoding='utf-8'))
            assert config.scenario.name in ScenarioNames.get_all()

    def test_angles_are_degrees(self):
        """設定ファイルの角度は度"""
        config = load_config(read_config('epr_bell.cfg'))
        assert config.scenario.parameters['angle_b'] == pytest.approx(math.pi / 4)
        assert config.engine.engine_type == EngineTypes.ENDQT
        assert config.settings.trials == 1000

    def test_all_errors_reported(self):
        """全ての誤りをまとめて報告する"""
        text = '\n'.join([
            '[scenario]', 'name = SternGerlachInterferometer', 'foo = 1',
            '[engine]', 'trials = 3',
            '[x]', 'y = 1',
        ])
        with pytest.raises(ConfigError) as excinfo:
            load_config(text)
        errors = excinfo.value.errors
        assert 'scenario.foo: unknown key' in errors
        assert '[x]: unknown section' in errors
        assert 'engine.type: missing required key' in errors

    def test_out_of_range_value(self):
        """範囲外の値はその条件を示す"""
        text = read_config('stern_gerlach.cfg').replace('lambda = 0.5', 'lambda = -1')
        with pytest.raises(ConfigError) as excinfo:
            load_config(text)
        assert 'grw.lambda must be > 0' in excinfo.value.errors

    def test_unknown_initiator_kind(self):
        """未知のイニシエータの種類は拒否"""
        text = read_config('sdc_chain.cfg').replace('S0=A', 'S0=C')
        with pytest.raises(ConfigError) as excinfo:
            load_config(text)
        assert any('endqt.initiators' in e for e in excinfo.value.errors)

    def test_syntax_error(self):
        """INI として読めない内容は ConfigError"""
        with pytest.raises(ConfigError):
            load_config('name = orphan')

    def test_overrides(self):
        """section.key の上書き"""
        config = load_config(read_config('weak_sweep.cfg'), {'scenario.coupling': '0.5', 'engine.seed': '9'})
        assert config.scenario.parameters['coupling'] == pytest.approx(0.5)
        assert config.settings.seed == 9

    def test_endqt_environment_size(self):
        """[endqt] の環境の大きさは分類にも使われる"""
        config = load_config(read_config('epr_bell.cfg'), {'endqt.env_qubits': '4'})
        assert config.engine.params.env_qubits == 4
        assert config.settings.env_qubits == 4

    def test_differentiated_systems(self):
        """scenario.differentiated で t=0 に分化している系を指定"""
        config = load_config(read_config('epr_bell.cfg'), {'scenario.differentiated': 'Alice, Bob'})
        assert config.scenario.differentiated == ['Alice', 'Bob']
        with pytest.raises(ConfigError):
            load_config(read_config('epr_bell.cfg'), {'scenario.differentiated': 'Carol'})

    def test_engine_defaults_from_scenario(self):
        """設定で省略した生成子はシナリオの既定を使う"""
        config = load_config(read_config('stern_gerlach.cfg'))
        assert config.engine.params.amplification == {'D': 20.0}
        assert _engine_for(stern_gerlach(), EngineTypes.GRW).params.amplification == {'D': 20.0}


class TestParameterSweep:
    """パラメータスイープのテストクラス"""

    def test_coupling_sweep(self):
        """結合の強さで最終的な D* が 0 から 1 へ"""
        rows = parameter_sweep(read_config('weak_sweep.cfg'), 'scenario.coupling', ['0', str(math.pi / 2)])
        assert [row['value'] for row in rows] == pytest.approx([0.0, math.pi / 2])
        assert rows[0]['degree'] == pytest.approx(0.0, abs=1e-9)
        assert rows[1]['degree'] == pytest.approx(1.0, abs=1e-9)
        assert all(row['process_class'] == ProcessKinds.REVERSIBLE for row in rows)

    def test_empty_values_rejected(self):
        """値が空なら拒否"""
        with pytest.raises(ValidationError):
            parameter_sweep(read_config('weak_sweep.cfg'), 'scenario.coupling', [])


class TestVerifySuite:
    """検証スイートのテストクラス"""

    @pytest.mark.parametrize('suite', [VerifySuites.EQ3, VerifySuites.DEPHASING, VerifySuites.SWEEP])
    def test_fast_suites_pass(self, suite):
        """全ての検査が合格"""
        results = verify_suite(suite)
        assert results
        assert all(r['passed'] for r in results), [r for r in results if not r['passed']]

    @pytest.mark.slow
    @pytest.mark.parametrize('suite', [VerifySuites.BELL, VerifySuites.STRUCTURE])
    def test_slow_suites_pass(self, suite):
        """全ての検査が合格（乱数のモデル・グラフを1000個ずつ）"""
        results = verify_suite(suite, seed=2024)
        assert all(r['passed'] for r in results), [r for r in results if not r['passed']]

    def test_unknown_suite(self):
        """未知のスイートは拒否"""
        with pytest.raises(ValidationError):
            verify_suite('everything')
