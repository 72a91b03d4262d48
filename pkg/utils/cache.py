"""
キャッシュ機能ユーティリティ

区間ごとの伝播演算子 exp(−iHΔt) を再利用するための
LRUキャッシュを提供します。
"""

import logging
import threading
from collections import OrderedDict
from typing import Any, Dict, Hashable, Optional

import numpy as np

from hilbert import expm_hermitian

logger = logging.getLogger(__name__)


class LRUCache:
    """LRU（Least Recently Used）キャッシュ"""

    def __init__(self, max_size: int = 256):
        """
        LRUキャッシュの初期化

        Args:
            max_size: キャッシュの最大サイズ
        """
        self.max_size = max_size
        self.cache: 'OrderedDict[Hashable, Any]' = OrderedDict()
        self.hits = 0
        self.misses = 0

    def get(self, key: Hashable) -> Optional[Any]:
        """
        キャッシュから値を取得

        Args:
            key: キャッシュキー

        Returns:
            Any: キャッシュされた値、存在しない場合はNone
        """
        if key in self.cache:
            self.cache.move_to_end(key)
            self.hits += 1
            return self.cache[key]
        self.misses += 1
        return None

    def set(self, key: Hashable, value: Any) -> None:
        """
        キャッシュに値を設定

        Args:
            key: キャッシュキー
            value: キャッシュする値
        """
        if key in self.cache:
            self.cache.move_to_end(key)
        elif len(self.cache) >= self.max_size:
            # 最も古いキーを削除
            self.cache.popitem(last=False)
        self.cache[key] = value

    def clear(self) -> None:
        """キャッシュをクリア"""
        self.cache.clear()
        self.hits = 0
        self.misses = 0

    def size(self) -> int:
        """キャッシュサイズを取得"""
        return len(self.cache)

    def get_stats(self) -> Dict[str, Any]:
        """キャッシュ統計を取得"""
        total = self.hits + self.misses
        hit_rate = self.hits / total if total else 0.0
        return {
            'size': self.size(),
            'hits': self.hits,
            'misses': self.misses,
            'hit_rate': f"{hit_rate:.2%}",
        }


class PropagatorCache:
    """区間伝播演算子のキャッシュ"""

    def __init__(self, max_size: int = 256):
        self._cache = LRUCache(max_size=max_size)
        # 並列の試行で共有する
        self._lock = threading.Lock()

    def propagator(self, key: Hashable, hamiltonian: np.ndarray, duration: float) -> np.ndarray:
        """
        exp(−iHΔt) を取得（キーと区間長が同じなら再計算しない）

        Args:
            key: ハミルトニアンを識別するキー（有効な相互作用の組など）
            hamiltonian: 全空間のハミルトニアン
            duration: 区間長
        """
        cache_key = (key, round(float(duration), 12))
        with self._lock:
            cached = self._cache.get(cache_key)
        if cached is not None:
            return cached
        u = expm_hermitian(hamiltonian, duration)
        u.setflags(write=False)
        with self._lock:
            self._cache.set(cache_key, u)
        logger.debug(f"伝播演算子を計算: key={key}, Δt={duration:.6g}")
        return u

    def clear(self) -> None:
        with self._lock:
            self._cache.clear()

    def get_stats(self) -> Dict[str, Any]:
        with self._lock:
            return self._cache.get_stats()
