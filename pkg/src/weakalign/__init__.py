"""Differentiable weak temporal alignment of multi-modal sequences."""

from .dtw import dtw, dtw_bruteforce, dtw_path, softdtw_backward, softdtw_forward, softmin
from .s2dtw import (
    S2dtwParams,
    S2dtwResult,
    align_pairs,
    path_matrix,
    s2dtw,
    s2dtw_backward,
    s2dtw_forward,
    s2dtw_forward_delta,
)
from .seqcore import DistanceMatrix, DistanceMeasure, FeatureSequence, pairwise_distance

__all__ = [
    "DistanceMatrix",
    "DistanceMeasure",
    "FeatureSequence",
    "S2dtwParams",
    "S2dtwResult",
    "align_pairs",
    "dtw",
    "dtw_bruteforce",
    "dtw_path",
    "pairwise_distance",
    "path_matrix",
    "s2dtw",
    "s2dtw_backward",
    "s2dtw_forward",
    "s2dtw_forward_delta",
    "softdtw_backward",
    "softdtw_forward",
    "softmin",
]
