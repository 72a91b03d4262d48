"""
生成的量子論シミュレータ - 定数定義

アプリケーション全体で使用する定数を定義します。
"""

from typing import List


class Tolerances:
    """数値許容誤差の階層"""
    CONSTRUCTION = 1e-10      # 状態・演算子の構築時不変条件
    COMPLETENESS = 1e-9       # チャネル・POVMの完全性
    ASSERTION = 1e-8          # テストでの比較
    UNITARY = 1e-9            # ユニタリ判定
    ENTROPY_CUTOFF = 1e-12    # これ未満の固有値はエントロピーに寄与しない
    ABSENT_AMPLITUDE = 1e-12  # 重なり行列で「欠落」とみなす振幅
    WORLD_PRUNE = 1e-12       # MWIで刈り込む世界の重み
    DISTURBANCE = 1e-6        # EnDQT非撹乱判定の可換性許容誤差
    DOMINANT_SITE = 0.99      # GRW崩壊後の支配的サイト確率


class EdgeKinds:
    """相互作用グラフの辺の種類"""
    SDI = 'SDI'
    UDI = 'UDI'
    POTENTIAL_DESTRUCTION = 'PotentialDestruction'
    DESTRUCTION = 'Destruction'

    # 決定構造(DS)側の辺と不決定構造(IS)側の辺
    DS_CLASS = (SDI, DESTRUCTION)
    IS_CLASS = (UDI, POTENTIAL_DESTRUCTION)

    @classmethod
    def get_all(cls) -> List[str]:
        """全ての辺の種類を取得"""
        return [cls.SDI, cls.UDI, cls.POTENTIAL_DESTRUCTION, cls.DESTRUCTION]

    @classmethod
    def is_valid(cls, kind: str) -> bool:
        """辺の種類が有効かチェック"""
        return kind in cls.get_all()


class NodeKinds:
    """系ノードの種類"""
    GENERATOR = 'Generator'
    NON_GENERATOR = 'NonGenerator'
    INITIATOR = 'Initiator'

    @classmethod
    def get_all(cls) -> List[str]:
        return [cls.GENERATOR, cls.NON_GENERATOR, cls.INITIATOR]


class StructureClasses:
    """分割クラス"""
    DS = 'DS'
    IS = 'IS'


class ProcessKinds:
    """デコヒーレンス過程の分類"""
    REVERSIBLE = 'Reversible'
    QUASI_IRREVERSIBLE = 'QuasiIrreversible'


class EngineTypes:
    """理論エンジンの種類"""
    GRW = 'grw'
    MWI = 'mwi'
    RELATIONAL = 'relational'
    ENDQT = 'endqt'

    @classmethod
    def get_all(cls) -> List[str]:
        return [cls.GRW, cls.MWI, cls.RELATIONAL, cls.ENDQT]


class MwiVariants:
    """MWIの変種"""
    QUASI_LOCAL = 'QuasiLocal'
    LOCAL = 'Local'
    GLOBAL = 'Global'

    @classmethod
    def get_all(cls) -> List[str]:
        return [cls.QUASI_LOCAL, cls.LOCAL, cls.GLOBAL]


class RelationalVariants:
    """単一世界関係主義の変種"""
    RQM = 'RQM'
    SINGLE_WORLD = 'SingleWorld'

    @classmethod
    def get_all(cls) -> List[str]:
        return [cls.RQM, cls.SINGLE_WORLD]


class InitiatorKinds:
    """EnDQTイニシエータの種類"""
    A = 'A'  # 全ての系に対するDCを既定で持つ
    B = 'B'  # モデルで最初に割り当てる


class ScenarioNames:
    """シナリオ名"""
    STERN_GERLACH = 'SternGerlachInterferometer'
    EPR_BELL = 'EprBell'
    SDC_CHAIN = 'SdcChain'
    WEAK_SWEEP = 'WeakMeasurementSweep'

    @classmethod
    def get_all(cls) -> List[str]:
        return [cls.STERN_GERLACH, cls.EPR_BELL, cls.SDC_CHAIN, cls.WEAK_SWEEP]


class HamiltonianTags:
    """相互作用ハミルトニアンのタグ"""
    RECORD = 'record'
    DEPHASE = 'dephase'
    DISTURB = 'disturb'
    EXCHANGE = 'exchange'

    @classmethod
    def get_all(cls) -> List[str]:
        return [cls.RECORD, cls.DEPHASE, cls.DISTURB, cls.EXCHANGE]

    @classmethod
    def is_valid(cls, tag: str) -> bool:
        return tag in cls.get_all()


class EventTypes:
    """イベントログの種類"""
    RUN_START = 'run_start'
    RUN_END = 'run_end'
    INTERACTION_END = 'interaction_end'
    COLLAPSE = 'collapse'
    DESTRUCTION = 'destruction'
    BRANCH = 'branch'
    RELATIVE_FACT = 'relative_fact'
    DC_GRANT = 'dc_grant'
    DC_DENIED = 'dc_denied'
    DETERMINATE = 'determinate'
    NO_EVENT = 'no_event'


class CommandTypes:
    """CLIコマンドタイプ"""
    RUN = 'run'
    SWEEP = 'sweep'
    EXPORT_GRAPH = 'export-graph'
    VERIFY = 'verify'
    BELL = 'bell'


class VerifySuites:
    """verifyコマンドのスイート名"""
    EQ3 = 'eq3'
    DEPHASING = 'dephasing'
    BELL = 'bell'
    SWEEP = 'sweep'
    STRUCTURE = 'structure'

    @classmethod
    def get_all(cls) -> List[str]:
        return [cls.EQ3, cls.DEPHASING, cls.BELL, cls.SWEEP, cls.STRUCTURE]


class ExitCodes:
    """終了コード"""
    SUCCESS = 0
    VALIDATION_ERROR = 1
    INTEGRITY_FAILURE = 2


class OutputFormats:
    """表の出力形式"""
    CSV = 'csv'
    JSON = 'json'

    @classmethod
    def get_all(cls) -> List[str]:
        return [cls.CSV, cls.JSON]


class SamplingModes:
    """ベル統計の結果の出どころ"""
    ENGINE = 'engine'          # 全試行をエンジンで実行
    CALIBRATED = 'calibrated'  # エンジンの試行がボルン則と一致したので残りを同時分布から引く

    @classmethod
    def get_all(cls) -> List[str]:
        return [cls.ENGINE, cls.CALIBRATED]


class LogLevels:
    """ログレベル"""
    DEBUG = 'DEBUG'
    INFO = 'INFO'
    WARNING = 'WARNING'
    ERROR = 'ERROR'
    CRITICAL = 'CRITICAL'

    @classmethod
    def get_all(cls) -> List[str]:
        return [cls.DEBUG, cls.INFO, cls.WARNING, cls.ERROR, cls.CRITICAL]


class ErrorMessages:
    """エラーメッセージ"""
    LABEL_COLLISION = "ラベルが重複しています"
    UNKNOWN_LABEL = "未知のラベルです"
    NOT_UNITARY = "ユニタリではありません"
    DIMENSION_MISMATCH = "次元が一致しません"
    NOT_NORMALIZED = "規格化されていません"
    NOT_HERMITIAN = "エルミートではありません"
    INTEGRITY_FAILURE = "不変条件が破れました"


class DefaultValues:
    """デフォルト値"""
    STABILITY_EPS = 1e-3
    STABILITY_WINDOW = 0.25
    SIZE_THRESHOLD = 8
    COUPLING_LOW = 0.5
    COUPLING_HIGH = 1.5
    GRW_LAMBDA = 0.5
    GRW_SIGMA = 0.1
    CORRELATOR_TRIALS = 100_000
    BELL_CALIBRATION_TRIALS = 400
    CALIBRATION_P_VALUE = 1e-3
    SEED = 42
    WORKERS = 1
    DT = 0.05
    ENV_QUBITS = 64
    LOG_LEVEL = 'INFO'


class FilePaths:
    """ファイルパス"""
    OUTPUT_DIR = 'output'
    LOG_DIR = 'logs'
    LOG_FILE = 'gqt_sim.log'
    EVENT_LOG = 'events.jsonl'
    STATISTICS = 'statistics'
    GRAPH = 'graph.dot'
