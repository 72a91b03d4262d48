"""
理論エンジンモジュール

各生成的理論（GRW・MWI・関係主義・EnDQT）のエンジンを提供
"""

from typing import Any, Dict, Optional

from constants import EngineTypes
from exceptions import EngineError

from .base_engine import RunContext, TheoryEngine
from .endqt_engine import EnDqtEngine, EnDqtParams
from .grw_engine import GrwEngine, GrwParams
from .mwi_engine import MwiEngine
from .relational_engine import RelationalEngine


def create_engine(engine_type: str, variant: Optional[str] = None,
                  params: Optional[Dict[str, Any]] = None) -> TheoryEngine:
    """
    エンジンの生成

    Args:
        engine_type: grw / mwi / relational / endqt
        variant: MWI・関係主義の変種
        params: エンジン固有のパラメータ（GrwParams・EnDqtParams の引数、関係主義では generators）

    Raises:
        EngineError: 未知のエンジンの場合
    """
    params = dict(params or {})
    if engine_type == EngineTypes.GRW:
        return GrwEngine(GrwParams(**params))
    if engine_type == EngineTypes.MWI:
        return MwiEngine(variant) if variant else MwiEngine()
    if engine_type == EngineTypes.RELATIONAL:
        kwargs = {'generators': params.get('generators')}
        if variant:
            kwargs['variant'] = variant
        return RelationalEngine(**kwargs)
    if engine_type == EngineTypes.ENDQT:
        return EnDqtEngine(EnDqtParams(**params))
    raise EngineError(f"未知のエンジンです: {engine_type}", engine=engine_type, operation='create')


__all__ = [
    'RunContext',
    'TheoryEngine',
    'GrwEngine',
    'GrwParams',
    'MwiEngine',
    'RelationalEngine',
    'EnDqtEngine',
    'EnDqtParams',
    'create_engine',
]
