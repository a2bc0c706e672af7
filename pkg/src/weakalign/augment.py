"""Windowed temporal permutations and the structure-preserving sampling distribution.

A permutation ``p`` (1-based tuple) reorders a sequence as
``X_p = [x_p(1), ..., x_p(n)]`` and belongs to ``T(n, w)`` when
``|p(k) - k| <= w`` for every position ``k``. Its probability is a softmax over
``T(n, w)`` of ``-||S - S_p||_F^2 / tau`` where ``S`` is the self-distance
matrix of the sequence and ``S_p`` its row/column reordering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, SizeError
from .seqcore import DistanceMeasure, FeatureSequence, Permutation, apply_permutation, self_similarity

ENUMERATION_GUARD = 10_000
STRATEGIES = ("ours", "uniform", "inverse")


def count_windowed(n: int, w: int) -> int:
    """``|T(n, w)|`` without enumerating, by a DP over the sliding window of used values."""
    if n < 1 or w < 0:
        raise ArgumentError(f"need n >= 1 and w >= 0, got n={n}, w={w}")
    w = min(w, n - 1)
    width = 2 * w + 1
    # bit t of a state <-> value (k - w + t) already used; values < 1 count as used
    start = 0
    for t in range(width):
        if 1 - w + t < 1:
            start |= 1 << t
    states = {start: 1}
    for k in range(1, n + 1):
        nxt: dict[int, int] = {}
        for mask, ways in states.items():
            for t in range(width):
                v = k - w + t
                if v < 1 or v > n or mask >> t & 1:
                    continue
                new = mask | 1 << t
                # value k - w leaves the window for good
                if k - w >= 1 and not new & 1:
                    continue
                shifted = new >> 1
                nxt[shifted] = nxt.get(shifted, 0) + ways
        states = nxt
    return sum(states.values())


def windowed_permutations(n: int, w: int, guard: int = ENUMERATION_GUARD) -> list[Permutation]:
    """All of ``T(n, w)`` in lexicographic order."""
    total = count_windowed(n, w)
    if total > guard:
        raise SizeError(f"|T({n},{w})| = {total} exceeds the enumeration guard of {guard}")
    out: list[Permutation] = []
    used = [False] * (n + 2)
    cur: list[int] = []

    def rec(k: int):
        if k > n:
            out.append(tuple(cur))
            return
        # the value k - w must be placed now or never
        forced = k - w if k - w >= 1 and not used[k - w] else None
        for v in range(max(1, k - w), min(n, k + w) + 1):
            if used[v] or (forced is not None and v != forced):
                continue
            used[v] = True
            cur.append(v)
            rec(k + 1)
            cur.pop()
            used[v] = False

    rec(1)
    return out


@dataclass(frozen=True)
class PermutationDistribution:
    perms: tuple[Permutation, ...]
    probs: np.ndarray
    tau: float
    w: int
    n: int
    scores: np.ndarray  # squared Frobenius change of the self-distance matrix
    strategy: str = "ours"

    def prob(self, perm) -> float:
        """Probability of ``perm``; zero outside ``T(n, w)``."""
        try:
            return float(self.probs[self.perms.index(tuple(perm))])
        except ValueError:
            return 0.0

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "w": self.w,
            "tau": self.tau,
            "strategy": self.strategy,
            "perms": [list(p) for p in self.perms],
            "probs": self.probs.tolist(),
        }


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    p = np.exp(z)
    return p / p.sum()


def distribution_from_self_distances(
    S: np.ndarray, w: int, tau: float, strategy: str = "ours", guard: int = ENUMERATION_GUARD
) -> PermutationDistribution:
    if not tau > 0:
        raise ArgumentError(f"tau must be > 0, got {tau}")
    if strategy not in STRATEGIES:
        raise ArgumentError(f"strategy must be one of {STRATEGIES}")
    S = np.asarray(S, dtype=np.float64)
    n = S.shape[0]
    perms = windowed_permutations(n, w, guard)
    idx = np.asarray(perms, dtype=np.int64) - 1
    permuted = S[idx[:, :, None], idx[:, None, :]]
    scores = ((permuted - S[None]) ** 2).sum(axis=(1, 2))
    if strategy == "ours":
        logits = -scores / tau
    elif strategy == "inverse":
        logits = scores / tau
    else:
        logits = np.zeros_like(scores)
    return PermutationDistribution(tuple(perms), _softmax(logits), float(tau), int(w), n, scores, strategy)


def permutation_distribution(
    X: FeatureSequence,
    w: int = 1,
    tau: float = 0.1,
    measure: DistanceMeasure | str = DistanceMeasure.COSINE,
    strategy: str = "ours",
    guard: int = ENUMERATION_GUARD,
) -> PermutationDistribution:
    S = self_similarity(X, measure).values
    return distribution_from_self_distances(S, w, tau, strategy, guard)


def _rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_permutation(dist: PermutationDistribution, rng) -> Permutation:
    """Inverse-CDF draw; ``rng`` is a Generator or a seed."""
    u = _rng(rng).random()
    cdf = np.cumsum(dist.probs)
    k = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return dist.perms[min(k, len(dist.perms) - 1)]


def augment_pair(
    X: FeatureSequence,
    Y: FeatureSequence,
    w: int = 1,
    tau: float = 0.1,
    rng=None,
    measure: DistanceMeasure | str = DistanceMeasure.COSINE,
    strategy: str = "ours",
):
    """Shuffle clips and captions independently; returns ``(X~, Y~, pX, pY)``."""
    rng = _rng(rng)
    pX = sample_permutation(permutation_distribution(X, w, tau, measure, strategy), rng)
    pY = sample_permutation(permutation_distribution(Y, w, tau, measure, strategy), rng)
    return apply_permutation(X, pX), apply_permutation(Y, pY), pX, pY
