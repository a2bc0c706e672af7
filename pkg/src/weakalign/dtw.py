"""Hard DTW, Soft-DTW forward/backward and an exhaustive path oracle.

Boundary convention: r[0, 0] = 0 and r[i, 0] = r[0, j] = +inf for i, j >= 1,
so every alignment starts at (1, 1) and r[1, 1] = delta[1, 1].

The batched kernels (``soft_dp_forward`` / ``soft_dp_backward``) take
arrays of shape ``(P, n, m)`` and sweep anti-diagonals, so that many
independent alignments cost one Python loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from numba import njit

from .errors import ArgumentError, NumericError, ShapeError, SizeError
from .seqcore import DistanceMatrix

BRUTEFORCE_MAX = 12
BOUNDARY = "r00=0, r_i0=r_0j=+inf"


def softmin(values: Sequence[float], gamma: float) -> float:
    """Soft minimum ``-gamma * log(sum(exp(-a / gamma)))``; exact min at gamma=0.

    ``+inf`` entries get zero weight; an all-``+inf`` input returns ``+inf``.
    """
    a = np.asarray(values, dtype=np.float64).ravel()
    if a.size == 0:
        raise ArgumentError("softmin of an empty set")
    if np.any(np.isnan(a)):
        raise NumericError("NaN passed to softmin")
    if gamma < 0:
        raise ArgumentError(f"gamma must be >= 0, got {gamma}")
    lo = a.min()
    if gamma == 0 or not np.isfinite(lo):
        return float(lo)
    return float(lo - gamma * np.log(np.exp(-(a - lo) / gamma).sum()))


def softmin3(a, b, c, gamma):
    """Elementwise soft minimum of three arrays (hard min when gamma == 0)."""
    lo = np.minimum(np.minimum(a, b), c)
    if gamma == 0:
        return lo
    with np.errstate(invalid="ignore", divide="ignore"):
        shift = np.where(np.isfinite(lo), lo, 0.0)
        total = np.exp(-(a - shift) / gamma) + np.exp(-(b - shift) / gamma) + np.exp(-(c - shift) / gamma)
        return shift - gamma * np.log(total)


@dataclass(frozen=True)
class AlignmentPath:
    """Monotone warping path of 1-based ``(i, j)`` pairs from (1, 1) to (n, m)."""

    steps: tuple[tuple[int, int], ...]

    def __post_init__(self):
        steps = tuple((int(i), int(j)) for i, j in self.steps)
        if not steps or steps[0] != (1, 1):
            raise ArgumentError("alignment path must start at (1, 1)")
        for (i0, j0), (i1, j1) in zip(steps, steps[1:]):
            if (i1 - i0, j1 - j0) not in ((1, 0), (0, 1), (1, 1)):
                raise ArgumentError(f"illegal move {(i0, j0)} -> {(i1, j1)}")
        object.__setattr__(self, "steps", steps)

    @property
    def end(self) -> tuple[int, int]:
        return self.steps[-1]

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def as_matrix(self, n: int, m: int) -> np.ndarray:
        A = np.zeros((n, m))
        for i, j in self.steps:
            A[i - 1, j - 1] = 1.0
        return A


@dataclass(frozen=True)
class DpTables:
    """Cumulative cost table ``R`` (n x m) plus the soft-min term of each cell."""

    R: np.ndarray
    gamma: float
    softmins: np.ndarray = field(repr=False)
    boundary: str = BOUNDARY

    @property
    def shape(self):
        return self.R.shape


def _values(delta) -> np.ndarray:
    D = delta.values if isinstance(delta, DistanceMatrix) else np.asarray(delta, dtype=np.float64)
    if D.ndim != 2 or 0 in D.shape:
        raise ShapeError(f"expected a non-empty 2-d matrix, got shape {D.shape}")
    if np.any(np.isnan(D)):
        raise NumericError(f"NaN in distance matrix at {tuple(int(v) + 1 for v in np.argwhere(np.isnan(D))[0])}")
    return D


@lru_cache(maxsize=256)
def _diagonals(n: int, m: int):
    """Per anti-diagonal, the 1-based (i, j) cell indices in padded coordinates."""
    out = []
    for k in range(2, n + m + 1):
        i = np.arange(max(1, k - m), min(n, k - 1) + 1)
        out.append((i, k - i))
    return out


def soft_dp_forward(D: np.ndarray, gamma: float):
    """Batched cumulative-cost recursion.

    ``D`` has shape ``(P, n, m)``. Returns ``(R, S)`` where ``R`` is the padded
    ``(P, n+1, m+1)`` table and ``S`` the ``(P, n, m)`` soft-min term of each
    cell, so that ``R[:, 1:, 1:] == D + S``.
    """
    P, n, m = D.shape
    R = np.full((P, n + 1, m + 1), np.inf)
    R[:, 0, 0] = 0.0
    S = np.empty((P, n, m))
    for i, j in _diagonals(n, m):
        s = softmin3(R[:, i - 1, j], R[:, i, j - 1], R[:, i - 1, j - 1], gamma)
        S[:, i - 1, j - 1] = s
        R[:, i, j] = D[:, i - 1, j - 1] + s
    if not np.all(np.isfinite(R[:, 1:, 1:])):
        raise NumericError("non-finite cumulative cost (overflow or NaN)")
    return R, S


def soft_dp_backward(R: np.ndarray, S: np.ndarray, gamma: float) -> np.ndarray:
    """Batched reverse recursion: ``E[p, i, j] = d r[n, m] / d r[i, j]``.

    Edge weight from a successor cell ``s`` back to ``(i, j)`` is
    ``exp((softmin_s - r[i, j]) / gamma)``.
    """
    P, n, m = S.shape
    Rp = np.full((P, n + 2, m + 2), -np.inf)
    Rp[:, 1 : n + 1, 1 : m + 1] = R[:, 1:, 1:]
    Sp = np.zeros((P, n + 2, m + 2))
    Sp[:, 1 : n + 1, 1 : m + 1] = S
    Sp[:, n + 1, :] = -np.inf
    Sp[:, :, m + 1] = -np.inf
    E = np.zeros((P, n + 2, m + 2))
    E[:, n, m] = 1.0
    with np.errstate(invalid="ignore"):
        for i, j in reversed(_diagonals(n, m)[:-1]):
            r = Rp[:, i, j]
            E[:, i, j] = (
                E[:, i + 1, j] * np.exp((Sp[:, i + 1, j] - r) / gamma)
                + E[:, i, j + 1] * np.exp((Sp[:, i, j + 1] - r) / gamma)
                + E[:, i + 1, j + 1] * np.exp((Sp[:, i + 1, j + 1] - r) / gamma)
            )
    return E[:, 1 : n + 1, 1 : m + 1]


def dtw(delta) -> tuple[float, DpTables]:
    """Hard-min DTW by dynamic programming."""
    D = _values(delta)
    R, S = soft_dp_forward(D[None], 0.0)
    return float(R[0, -1, -1]), DpTables(R[0, 1:, 1:], 0.0, S[0])


def dtw_path(delta) -> tuple[float, AlignmentPath]:
    """Hard DTW cost and one optimal path, recovered by backtracking the DP table.

    Among equally cheap predecessors the diagonal wins, then up, then left.
    """
    cost, tables = dtw(delta)
    R = tables.R
    i, j = R.shape[0] - 1, R.shape[1] - 1
    steps = [(i + 1, j + 1)]
    while (i, j) != (0, 0):
        cands = [(i - 1, j - 1), (i - 1, j), (i, j - 1)]
        cands = [(a, b) for a, b in cands if a >= 0 and b >= 0]
        i, j = min(cands, key=lambda c: R[c])
        steps.append((i + 1, j + 1))
    return cost, AlignmentPath(tuple(reversed(steps)))


def softdtw_forward(delta, gamma: float) -> tuple[float, DpTables]:
    if not gamma > 0:
        raise ArgumentError(f"Soft-DTW requires gamma > 0, got {gamma}")
    D = _values(delta)
    R, S = soft_dp_forward(D[None], gamma)
    return float(R[0, -1, -1]), DpTables(R[0, 1:, 1:], gamma, S[0])


def softdtw_backward(delta, tables: DpTables, gamma: float | None = None) -> np.ndarray:
    """Gradient matrix ``d r[n, m] / d delta[i, j]`` (equal to ``d r[n, m] / d r[i, j]``)."""
    D = _values(delta)
    if tables.R.shape != D.shape:
        raise ShapeError(f"tables have shape {tables.R.shape} but delta has shape {D.shape}")
    gamma = tables.gamma if gamma is None else gamma
    if not gamma > 0:
        raise ArgumentError("Soft-DTW backward requires gamma > 0")
    n, m = D.shape
    R = np.full((1, n + 1, m + 1), np.inf)
    R[0, 1:, 1:] = tables.R
    return soft_dp_backward(R, tables.softmins[None], gamma)[0]


@njit(cache=True)
def _exhaustive(D):
    n, m = D.shape
    depth_max = n + m - 1
    pi = np.zeros(depth_max, np.int64)
    pj = np.zeros(depth_max, np.int64)
    acc = np.zeros(depth_max)
    move = np.zeros(depth_max, np.int64)
    best = np.inf
    best_i = np.zeros(depth_max, np.int64)
    best_j = np.zeros(depth_max, np.int64)
    best_len = 0
    count = 0
    acc[0] = D[0, 0]
    depth = 0
    while depth >= 0:
        i = pi[depth]
        j = pj[depth]
        if i == n - 1 and j == m - 1:
            count += 1
            if acc[depth] < best:
                best = acc[depth]
                best_len = depth + 1
                for k in range(depth + 1):
                    best_i[k] = pi[k]
                    best_j[k] = pj[k]
            depth -= 1
            continue
        mv = move[depth]
        if mv == 3:
            depth -= 1
            continue
        move[depth] = mv + 1
        # right, down, diagonal: lexicographic order of the resulting paths
        if mv == 0:
            ni, nj = i, j + 1
        elif mv == 1:
            ni, nj = i + 1, j
        else:
            ni, nj = i + 1, j + 1
        if ni >= n or nj >= m:
            continue
        depth += 1
        pi[depth] = ni
        pj[depth] = nj
        acc[depth] = D[ni, nj] + acc[depth - 1]
        move[depth] = 0
    return best, best_i[:best_len], best_j[:best_len], count


def delannoy(a: int, b: int) -> int:
    """Number of monotone paths across an ``(a+1) x (b+1)`` grid."""
    return sum(math.comb(a, k) * math.comb(b, k) * 2**k for k in range(min(a, b) + 1))


def dtw_bruteforce(delta, max_side: int = BRUTEFORCE_MAX) -> tuple[float, AlignmentPath]:
    """Minimum path cost by enumerating every monotone path.

    Ties go to the lexicographically smallest path.
    """
    D = np.ascontiguousarray(_values(delta))
    n, m = D.shape
    if n > max_side or m > max_side:
        raise SizeError(f"{n}x{m} exceeds the brute-force guard of {max_side}x{max_side}")
    cost, bi, bj, _ = _exhaustive(D)
    return float(cost), AlignmentPath(tuple(zip((bi + 1).tolist(), (bj + 1).tolist())))
