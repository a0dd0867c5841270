"""Rateless (LT) coded matrix-vector multiplication with straggler simulation and a TCP runtime."""

from . import analysis, delaysim, ltcode, strategies
from .analysis import DelayParams
from .estimators import CodedMatVec
from .ltcode import (DecoderState, EncodingGraph, build_degree_distribution, decode_full,
                     encode_matrix, estimate_overhead, generate_graph)
from .strategies import StrategySpec

__version__ = "0.1.0"

__all__ = [
    "analysis", "delaysim", "ltcode", "strategies",
    "CodedMatVec", "DecoderState", "DelayParams", "EncodingGraph", "StrategySpec",
    "build_degree_distribution", "decode_full", "encode_matrix", "estimate_overhead",
    "generate_graph",
]
