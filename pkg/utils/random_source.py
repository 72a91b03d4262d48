"""
分割可能な乱数源

シード一つから独立なストリームを試行ごとに切り出す。
"""

from typing import List, Optional

import numpy as np


class RandomSource:
    """numpy SeedSequence を包んだ分割可能な乱数源"""

    def __init__(self, seed: Optional[int] = None, sequence: Optional[np.random.SeedSequence] = None):
        self._sequence = sequence if sequence is not None else np.random.SeedSequence(seed)
        self.generator = np.random.default_rng(self._sequence)

    @property
    def entropy(self):
        return self._sequence.entropy

    def split(self, n: int) -> List['RandomSource']:
        """独立な子ストリームを n 個作成"""
        return [RandomSource(sequence=child) for child in self._sequence.spawn(n)]

    def child(self) -> 'RandomSource':
        return self.split(1)[0]

    def __repr__(self) -> str:
        return f"RandomSource(entropy={self.entropy})"


def trial_sources(seed: int, trials: int) -> List[RandomSource]:
    """試行ごとの乱数源（同じ seed なら常に同じ列）"""
    return RandomSource(seed).split(trials)
