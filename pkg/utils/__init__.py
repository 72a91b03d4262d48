"""
ユーティリティモジュール

伝播演算子キャッシュと分割可能な乱数源を提供
"""
