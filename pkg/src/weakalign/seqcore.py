"""Feature sequences, distance matrices and permutation primitives.

Public contracts index time steps from 1 (paths, permutations); the
underlying numpy storage is ordinary 0-based.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateVectorError, DimensionError, PermutationError

Permutation = tuple[int, ...]


class DistanceMeasure(str, enum.Enum):
    COSINE = "cosine_dist"
    NEG_DOT = "neg_dot"

    @classmethod
    def parse(cls, value: "DistanceMeasure | str") -> "DistanceMeasure":
        if isinstance(value, cls):
            return value
        for member in cls:
            if value in (member.value, member.name, member.name.lower()):
                return member
        raise ValueError(f"unknown distance measure {value!r}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FeatureSequence:
    """An ordered run of ``n`` feature vectors of dimension ``d``."""

    items: np.ndarray
    modality: str = "clip"

    def __post_init__(self):
        items = np.asarray(self.items, dtype=np.float64)
        if items.ndim == 1:
            items = items[:, None]
        if items.ndim != 2 or items.shape[0] < 1 or items.shape[1] < 1:
            raise DimensionError(f"expected an (n, d) array with n, d >= 1, got shape {items.shape}")
        if not np.all(np.isfinite(items)):
            raise DimensionError("feature sequence contains non-finite values")
        object.__setattr__(self, "items", _frozen(items))

    @property
    def n(self) -> int:
        return self.items.shape[0]

    @property
    def d(self) -> int:
        return self.items.shape[1]

    def __len__(self) -> int:
        return self.n

    def check_measure(self, measure: DistanceMeasure | str) -> None:
        if DistanceMeasure.parse(measure) is DistanceMeasure.COSINE:
            norms = np.linalg.norm(self.items, axis=1)
            bad = np.flatnonzero(norms == 0.0)
            if bad.size:
                raise DegenerateVectorError(
                    f"zero-norm vector at position {int(bad[0]) + 1} under cosine distance"
                )


@dataclass(frozen=True)
class DistanceMatrix:
    values: np.ndarray
    measure: str = DistanceMeasure.COSINE.value
    label: str = field(default="delta", compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or 0 in v.shape:
            raise DimensionError(f"distance matrix must be 2-d and non-empty, got shape {v.shape}")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def entry(self, i: int, j: int) -> float:
        """Entry at 1-based position (i, j)."""
        return float(self.values[i - 1, j - 1])


def as_array(X) -> np.ndarray:
    if isinstance(X, FeatureSequence):
        return X.items
    return np.asarray(X, dtype=np.float64)


def distance_array(X: np.ndarray, Y: np.ndarray, measure: DistanceMeasure | str) -> np.ndarray:
    """Pairwise distances on raw arrays; broadcasts over leading batch axes.

    ``X`` is ``(..., n, d)`` and ``Y`` is ``(..., m, d)``.
    """
    measure = DistanceMeasure.parse(measure)
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape[-1] != Y.shape[-1]:
        raise DimensionError(f"dimension mismatch: {X.shape[-1]} vs {Y.shape[-1]}")
    dots = X @ np.swapaxes(Y, -1, -2)
    if measure is DistanceMeasure.NEG_DOT:
        return -dots
    nx = np.linalg.norm(X, axis=-1)
    ny = np.linalg.norm(Y, axis=-1)
    if np.any(nx == 0.0) or np.any(ny == 0.0):
        raise DegenerateVectorError("zero-norm vector under cosine distance")
    cos = dots / (nx[..., :, None] * ny[..., None, :])
    return 1.0 - np.clip(cos, -1.0, 1.0)


def distance_grads(X: np.ndarray, Y: np.ndarray, G: np.ndarray, measure: DistanceMeasure | str):
    """Chain an upstream gradient ``G = dL/d delta`` into the two sequences.

    Returns ``(gX, gY)`` with ``gX[i] = sum_j G[i, j] * d delta(x_i, y_j) / d x_i``
    and symmetrically for ``gY``. Broadcasts over leading batch axes.
    """
    measure = DistanceMeasure.parse(measure)
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    G = np.asarray(G, dtype=np.float64)
    if measure is DistanceMeasure.NEG_DOT:
        return -(G @ Y), -(np.swapaxes(G, -1, -2) @ X)
    nx = np.linalg.norm(X, axis=-1, keepdims=True)
    ny = np.linalg.norm(Y, axis=-1, keepdims=True)
    if np.any(nx == 0.0) or np.any(ny == 0.0):
        raise DegenerateVectorError("zero-norm vector under cosine distance")
    Xh = X / nx
    Yh = Y / ny
    C = Xh @ np.swapaxes(Yh, -1, -2)
    GC = G * C
    # d(1 - cos)/dx = -(yh - cos * xh) / |x|
    gX = -((G @ Yh) - GC.sum(axis=-1, keepdims=True) * Xh) / nx
    gY = -((np.swapaxes(G, -1, -2) @ Xh) - np.swapaxes(GC, -1, -2).sum(axis=-1, keepdims=True) * Yh) / ny
    return gX, gY


def pairwise_distance(
    X: FeatureSequence, Y: FeatureSequence, measure: DistanceMeasure | str = DistanceMeasure.COSINE
) -> DistanceMatrix:
    measure = DistanceMeasure.parse(measure)
    if X.d != Y.d:
        raise DimensionError(f"dimension mismatch: {X.d} vs {Y.d}")
    X.check_measure(measure)
    Y.check_measure(measure)
    return DistanceMatrix(distance_array(X.items, Y.items, measure), measure.value)


def self_similarity(X: FeatureSequence, measure: DistanceMeasure | str = DistanceMeasure.COSINE) -> DistanceMatrix:
    D = pairwise_distance(X, X, measure).values.copy()
    # exact symmetry and zero diagonal regardless of rounding in the dot products
    D = 0.5 * (D + D.T)
    if DistanceMeasure.parse(measure) is DistanceMeasure.COSINE:
        # identical items are at distance exactly 0, not a rounding error away
        same = np.all(X.items[:, None, :] == X.items[None, :, :], axis=-1)
        D[same] = 0.0
    return DistanceMatrix(D, DistanceMeasure.parse(measure).value, label="self")


def check_permutation(perm: Sequence[int], n: int) -> np.ndarray:
    """Validate a 1-based permutation of length ``n``; return it 0-based."""
    p = np.asarray(perm, dtype=np.int64)
    if p.ndim != 1 or p.size != n:
        raise PermutationError(f"permutation of length {p.size} applied to a sequence of length {n}")
    if not np.array_equal(np.sort(p), np.arange(1, n + 1)):
        raise PermutationError(f"{tuple(int(v) for v in p)} is not a bijection on 1..{n}")
    return p - 1


def apply_permutation(X: FeatureSequence, perm: Sequence[int]) -> FeatureSequence:
    """Return ``[x_perm(1), ..., x_perm(n)]``."""
    idx = check_permutation(perm, X.n)
    return FeatureSequence(X.items[idx], X.modality)


def permutation_matrix(perm: Sequence[int]) -> np.ndarray:
    """``P`` with ``P @ v == v[perm]`` (0-based view of a 1-based permutation)."""
    idx = check_permutation(perm, len(perm))
    P = np.zeros((idx.size, idx.size))
    P[np.arange(idx.size), idx] = 1.0
    return P
