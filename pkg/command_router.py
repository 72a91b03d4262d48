"""
コマンド解析とハンドラールーティング管理

コマンドライン引数の解析から各コマンドの実行までを一元管理
"""

import argparse
import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from causal import build_endqt_dag
from constants import (
    CommandTypes, DefaultValues, EngineTypes, ExitCodes, FilePaths, OutputFormats, ScenarioNames, VerifySuites,
)
from event_log import EventLog, OutputBundle, read_text, rows_to_csv, rows_to_json, to_json
from exceptions import CommandParseError
from gqttypes import CommandDict
from scenarios import (
    bell_statistics, load_config, no_signalling_check, parameter_sweep, run, sweep_rows, verify_suite,
    weak_sweep, weak_sweep_rows,
)

logger = logging.getLogger(__name__)


class _RaisingParser(argparse.ArgumentParser):
    """エラー時に終了せず CommandParseError を送出するパーサー"""

    def error(self, message: str):
        raise CommandParseError(f"{self.prog}: {message}", command=self.prog)


def _number_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"数値のカンマ区切りではありません: {text}")


def _text_list(text: str) -> List[str]:
    parts = [part.strip() for part in text.split(',') if part.strip()]
    for part in parts:
        try:
            float(part)
        except ValueError:
            raise argparse.ArgumentTypeError(f"数値ではありません: {part}")
    return parts


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"1以上で指定してください: {text}")
    return value


def _format_table(rows: Sequence[Sequence[Any]], fmt: str) -> str:
    return rows_to_json(rows) if fmt == OutputFormats.JSON else rows_to_csv(rows)


class CommandRouter:
    """コマンド解析とハンドラールーティング管理"""

    def __init__(self, config):
        """
        ルーター初期化

        Args:
            config: 実行環境の設定オブジェクト
        """
        self.config = config
        self.parser = self.build_parser()
        self.handlers: Dict[str, Callable[[CommandDict], Dict[str, Any]]] = {
            CommandTypes.RUN: self._handle_run,
            CommandTypes.SWEEP: self._handle_sweep,
            CommandTypes.EXPORT_GRAPH: self._handle_export_graph,
            CommandTypes.VERIFY: self._handle_verify,
            CommandTypes.BELL: self._handle_bell,
        }
        self.command_count = 0
        self.error_count = 0
        logger.debug(f"CommandRouter初期化完了: {len(self.handlers)}個のハンドラー")

    def build_parser(self) -> argparse.ArgumentParser:
        """サブコマンド付きの引数パーサー"""
        parser = _RaisingParser(prog='gqt-sim', description='生成的量子論シミュレータ')
        sub = parser.add_subparsers(dest='type', parser_class=_RaisingParser)

        def add_common(p: argparse.ArgumentParser) -> None:
            p.add_argument('--out', help='出力ディレクトリ（省略時は GQT_OUTPUT_DIR）')
            p.add_argument('--format', choices=OutputFormats.get_all(), default=None, help='表の出力形式')
            p.add_argument('--seed', type=int, default=None, help='乱数シード')

        p_run = sub.add_parser(CommandTypes.RUN, help='シナリオを実行')
        p_run.add_argument('--config', required=True, help='設定ファイル')
        p_run.add_argument('--trials', type=_positive_int, default=None, help='試行回数の上書き')
        p_run.add_argument('--workers', type=_positive_int, default=None, help='並列スレッド数')
        add_common(p_run)

        p_sweep = sub.add_parser(CommandTypes.SWEEP, help='数値パラメータをスイープ')
        p_sweep.add_argument('--config', required=True, help='設定ファイル')
        p_sweep.add_argument('--param', required=True, help='パラメータのパス（section.key）')
        p_sweep.add_argument('--values', required=True, type=_text_list, help='値のカンマ区切り')
        add_common(p_sweep)

        p_graph = sub.add_parser(CommandTypes.EXPORT_GRAPH, help='EnDQTのイベントログから因果DAGを出力')
        p_graph.add_argument('--log', required=True, help='JSON-lines イベントログ')
        p_graph.add_argument('--out', help='出力するDOTファイル（省略時はログと同じ場所の graph.dot）')

        p_verify = sub.add_parser(CommandTypes.VERIFY, help='不変条件の検証スイートを実行')
        p_verify.add_argument('--suite', required=True, choices=VerifySuites.get_all())
        add_common(p_verify)

        p_bell = sub.add_parser(CommandTypes.BELL, help='ベル実験の相関とCHSH量')
        p_bell.add_argument('--engine', required=True, choices=EngineTypes.get_all())
        p_bell.add_argument('--variant', default=None, help='MWI・関係主義の変種')
        p_bell.add_argument('--angles', required=True, type=_number_list, help="a,a',b,b'（度）")
        p_bell.add_argument('--trials', type=_positive_int, default=DefaultValues.CORRELATOR_TRIALS)
        p_bell.add_argument('--exact', action='store_true', help='全ての試行をエンジンで実行')
        add_common(p_bell)
        return parser

    def parse_command(self, argv: Sequence[str]) -> CommandDict:
        """
        コマンドライン引数を解析

        実行前にパスと値を検証する。

        Args:
            argv: 引数（プログラム名を除く）

        Returns:
            CommandDict: コマンド情報を含む辞書

        Raises:
            CommandParseError: 引数が不正な場合
        """
        args = self.parser.parse_args(list(argv))
        if args.type is None:
            raise CommandParseError(f"サブコマンドを指定してください: {', '.join(self.handlers)}")
        command: CommandDict = {
            'type': args.type,
            'config': getattr(args, 'config', None),
            'param': getattr(args, 'param', None),
            'values': getattr(args, 'values', None),
            'log': getattr(args, 'log', None),
            'suite': getattr(args, 'suite', None),
            'angles': getattr(args, 'angles', None),
            'engine': getattr(args, 'engine', None),
            'variant': getattr(args, 'variant', None),
            'exact': bool(getattr(args, 'exact', False)),
            'workers': getattr(args, 'workers', None),
            'trials': getattr(args, 'trials', None),
            'seed': getattr(args, 'seed', None),
            'out': getattr(args, 'out', None),
            'format': getattr(args, 'format', None),
        }
        self._validate(command)
        logger.info(f"コマンド検出: {command['type']}")
        return command

    def _validate(self, command: CommandDict) -> None:
        for key in ('config', 'log'):
            path = command[key]
            if path is not None and not Path(path).is_file():
                raise CommandParseError(f"ファイルが見つかりません: {path}", command=path, command_type=command['type'])
        if command['angles'] is not None:
            if len(command['angles']) != 4 or not all(math.isfinite(a) for a in command['angles']):
                raise CommandParseError("--angles は a,a',b,b' の4つの有限な角度（度）です",
                                        command=str(command['angles']), command_type=command['type'])
        if command['seed'] is not None and command['seed'] < 0:
            raise CommandParseError("--seed は0以上で指定してください", command=str(command['seed']),
                                    command_type=command['type'])
        if command['type'] == CommandTypes.SWEEP and not command['values']:
            raise CommandParseError("--values が空です", command_type=command['type'])

    def route_command(self, command: CommandDict) -> Dict[str, Any]:
        """
        コマンドを適切なハンドラーにルーティングして実行

        Returns:
            {'exit_code', 'message', 'bundle', 'out'}（bundle は成功時に main が書き出す）
        """
        self.command_count += 1
        handler = self.handlers.get(command['type'])
        if handler is None:
            raise CommandParseError(f"不明なコマンドタイプ: {command['type']}", command_type=command['type'])
        logger.info(f"ルーティング実行: {command['type']} (#{self.command_count})")
        try:
            result = handler(command)
        except Exception:
            self.error_count += 1
            raise
        logger.info(f"ルーティング完了: {command['type']} -> exit {result['exit_code']}")
        return result

    def _out_dir(self, command: CommandDict, configured: Optional[str] = None) -> Path:
        return Path(command['out'] or configured or self.config.output_dir)

    def _format(self, command: CommandDict) -> str:
        return command['format'] or self.config.output_format

    def _seed(self, command: CommandDict, configured: Optional[int] = None) -> int:
        if command['seed'] is not None:
            return command['seed']
        return configured if configured is not None else self.config.default_seed

    def _handle_run(self, command: CommandDict) -> Dict[str, Any]:
        scenario_config = load_config(read_text(Path(command['config'])), defaults=self.config.run_settings())
        settings = scenario_config.settings
        if command['workers'] is not None:
            settings.workers = command['workers']
        fmt = command['format'] or settings.output_format
        report = run(scenario_config.scenario, scenario_config.engine,
                     command['trials'] or settings.trials, self._seed(command, settings.seed), settings)
        summary = report.summary()
        lines = [f"{summary['scenario']} / {scenario_config.engine.name}: trials={summary['trials']}, "
                 f"events={summary['events']}"]
        for system, counts in summary['statistics'].items():
            lines.append(f"  {system}: " + ', '.join(f"{value}={count}" for value, count in counts.items()))
        return {
            'exit_code': ExitCodes.SUCCESS,
            'message': '\n'.join(lines),
            'bundle': report.to_bundle(fmt),
            'out': self._out_dir(command, settings.output_dir),
        }

    def _handle_sweep(self, command: CommandDict) -> Dict[str, Any]:
        text = read_text(Path(command['config']))
        defaults = self.config.run_settings()
        if command['seed'] is not None:
            defaults.seed = command['seed']
        fmt = self._format(command)
        rows = parameter_sweep(text, command['param'], command['values'], defaults)
        bundle = OutputBundle()
        bundle.add(f"sweep.{fmt}", _format_table(sweep_rows(rows), fmt))
        scenario_name = load_config(text, defaults=defaults).scenario.name
        if scenario_name == ScenarioNames.WEAK_SWEEP and command['param'] == 'scenario.coupling':
            weak_rows = weak_sweep([float(v) for v in command['values']])
            bundle.add(f"weak_sweep.{fmt}", _format_table(weak_sweep_rows(weak_rows), fmt))
        lines = [f"{row['parameter']}={row['value']:g}: D*={row['degree']:.6g}, "
                 f"{row['process_class']}, events={row['events']}" for row in rows]
        return {'exit_code': ExitCodes.SUCCESS, 'message': '\n'.join(lines), 'bundle': bundle,
                'out': self._out_dir(command)}

    def _handle_export_graph(self, command: CommandDict) -> Dict[str, Any]:
        log_path = Path(command['log'])
        graph = build_endqt_dag(EventLog.read(log_path))
        target = Path(command['out']) if command['out'] else log_path.parent / FilePaths.GRAPH
        bundle = OutputBundle()
        bundle.add(target.name, graph.export_dot())
        return {
            'exit_code': ExitCodes.SUCCESS,
            'message': f"因果DAG: ノード {len(graph.nodes)}, 辺 {len(graph.live_edges())} -> {target}",
            'bundle': bundle,
            'out': target.parent,
        }

    def _handle_verify(self, command: CommandDict) -> Dict[str, Any]:
        results = verify_suite(command['suite'], self._seed(command))
        failed = [r for r in results if not r['passed']]
        lines = [f"{'PASS' if r['passed'] else 'FAIL'} {r['check']} ({r['detail']})" for r in results]
        lines.append(f"{command['suite']}: {len(results) - len(failed)}/{len(results)} passed")
        rows = [['check', 'passed', 'detail']] + [[r['check'], str(r['passed']).lower(), r['detail']] for r in results]
        bundle = OutputBundle()
        bundle.add(f"verify_{command['suite']}.{self._format(command)}", _format_table(rows, self._format(command)))
        return {
            'exit_code': ExitCodes.INTEGRITY_FAILURE if failed else ExitCodes.SUCCESS,
            'message': '\n'.join(lines),
            'bundle': bundle,
            'out': self._out_dir(command),
        }

    def _handle_bell(self, command: CommandDict) -> Dict[str, Any]:
        # CLI の角度は度、内部はラジアン
        angles = [math.radians(a) for a in command['angles']]
        seed = self._seed(command)
        stats = bell_statistics(command['engine'], angles, command['trials'], seed,
                                variant=command['variant'], exact_trials=command['exact'])
        signalling_free, worst = no_signalling_check(stats['counts'])
        stats['angles_degrees'] = list(command['angles'])
        stats['seed'] = seed
        stats['no_signalling'] = {'passed': signalling_free, 'max_standard_errors': worst}
        rows = [['x', 'y', 'E']] + [[*key.split(','), f"{value:.12g}"] for key, value in stats['correlators'].items()]
        bundle = OutputBundle()
        bundle.add('bell.json', to_json(stats))
        bundle.add(f"correlators.{self._format(command)}", _format_table(rows, self._format(command)))
        message = (f"CHSH S = {stats['chsh']:.6f} (|S| = {stats['chsh_abs']:.6f}), "
                   f"trials={command['trials']}, no-signalling {'ok' if signalling_free else 'VIOLATED'} "
                   f"({worst:.2f} SE)")
        return {'exit_code': ExitCodes.SUCCESS, 'message': message, 'bundle': bundle, 'out': self._out_dir(command)}
