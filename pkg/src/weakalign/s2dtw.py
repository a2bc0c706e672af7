"""Locally smoothed Soft-DTW with weak alignment.

Forward pipeline (default order): pairwise distances -> local neighbourhood
smoothing -> interleave dummy rows/columns at cost ``dummy_cost`` -> soft DP
over the ``(2n+1) x (2m+1)`` grid, ending at its bottom-right dummy corner.
The backward pass is exact reverse mode through the same three stages.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dtw import soft_dp_backward, soft_dp_forward, softmin3
from .errors import ArgumentError, DimensionError, NumericError, StateError
from .seqcore import DistanceMatrix, DistanceMeasure, FeatureSequence, distance_array, distance_grads

SMOOTH_FIRST = "smooth-first"
MERGE_FIRST = "merge-first"


@dataclass(frozen=True)
class S2dtwParams:
    gamma: float = 0.1
    dummy_cost: float = 0.5
    measure: str = DistanceMeasure.COSINE.value
    smoothing: bool = True
    weak: bool = True
    order: str = SMOOTH_FIRST

    def __post_init__(self):
        if not self.gamma > 0:
            raise ArgumentError(f"gamma must be > 0, got {self.gamma}")
        if not np.isfinite(self.dummy_cost):
            raise ArgumentError("dummy_cost must be finite")
        if self.order not in (SMOOTH_FIRST, MERGE_FIRST):
            raise ArgumentError(f"order must be {SMOOTH_FIRST!r} or {MERGE_FIRST!r}")
        object.__setattr__(self, "measure", DistanceMeasure.parse(self.measure).value)

    @classmethod
    def softdtw(cls, gamma: float = 0.1, measure: str = DistanceMeasure.COSINE.value) -> "S2dtwParams":
        """Plain Soft-DTW: no smoothing, no dummies."""
        return cls(gamma=gamma, measure=measure, smoothing=False, weak=False)


@dataclass(frozen=True)
class S2dtwResult:
    """Forward values and (after ``s2dtw_backward``) gradients for one pair.

    ``dp_input`` is the matrix the dynamic programme runs on; ``cum`` is its
    cumulative table. ``grad_cum`` is d cost / d cum over the DP grid and
    ``grad_delta`` is d cost / d delta over the raw n x m grid.
    """

    cost: float
    delta: np.ndarray
    delta_hat: np.ndarray
    dp_input: np.ndarray
    cum: np.ndarray
    dummy_mask: np.ndarray
    params: S2dtwParams
    grad_cum: np.ndarray | None = None
    grad_delta: np.ndarray | None = None
    _cache: dict | None = dataclasses.field(default=None, repr=False, compare=False)

    @property
    def has_gradients(self) -> bool:
        return self.grad_delta is not None


# -- smoothing ---------------------------------------------------------------


def smooth_batch(delta: np.ndarray, gamma: float):
    """Return ``(delta_hat, s)`` with ``delta_hat = delta + s`` over ``(P, n, m)``.

    ``s[i, j]`` is the soft-min of the in-range entries among the upper,
    left and upper-left neighbours; it is 0 at (1, 1).
    """
    P, n, m = delta.shape
    pad = np.full((P, n + 1, m + 1), np.inf)
    pad[:, 1:, 1:] = delta
    s = softmin3(pad[:, :-1, 1:], pad[:, 1:, :-1], pad[:, :-1, :-1], gamma)
    s[:, 0, 0] = 0.0
    return delta + s, s


def smooth_backward(delta: np.ndarray, s: np.ndarray, g: np.ndarray, gamma: float) -> np.ndarray:
    """Pull ``g = dL/d delta_hat`` back to ``dL/d delta``."""
    P, n, m = delta.shape
    pad = np.full((P, n + 1, m + 1), np.inf)
    pad[:, 1:, 1:] = delta
    with np.errstate(invalid="ignore", over="ignore"):
        up = g * np.exp((s - pad[:, :-1, 1:]) / gamma)
        left = g * np.exp((s - pad[:, 1:, :-1]) / gamma)
        diag = g * np.exp((s - pad[:, :-1, :-1]) / gamma)
    out = g.copy()
    out[:, :-1, :] += up[:, 1:, :]
    out[:, :, :-1] += left[:, :, 1:]
    out[:, :-1, :-1] += diag[:, 1:, 1:]
    return out


def merge_batch(delta: np.ndarray, dummy_cost: float) -> np.ndarray:
    P, n, m = delta.shape
    out = np.full((P, 2 * n + 1, 2 * m + 1), float(dummy_cost))
    out[:, 1::2, 1::2] = delta
    return out


def dummy_mask(n: int, m: int) -> np.ndarray:
    mask = np.ones((2 * n + 1, 2 * m + 1), dtype=bool)
    mask[1::2, 1::2] = False
    return mask


def smooth(delta, gamma: float) -> DistanceMatrix:
    D = delta.values if isinstance(delta, DistanceMatrix) else np.asarray(delta, dtype=np.float64)
    if np.any(np.isnan(D)):
        raise NumericError("NaN in distance matrix")
    measure = delta.measure if isinstance(delta, DistanceMatrix) else DistanceMeasure.COSINE.value
    return DistanceMatrix(smooth_batch(D[None], gamma)[0][0], measure, label="delta_hat")


def insert_dummies(delta_hat, dummy_cost: float) -> tuple[DistanceMatrix, np.ndarray]:
    """Interleave dummy rows/columns: entry (2i, 2j) (1-based) holds delta_hat[i, j]."""
    D = delta_hat.values if isinstance(delta_hat, DistanceMatrix) else np.asarray(delta_hat, dtype=np.float64)
    measure = delta_hat.measure if isinstance(delta_hat, DistanceMatrix) else DistanceMeasure.COSINE.value
    merged = merge_batch(D[None], dummy_cost)[0]
    return DistanceMatrix(merged, measure, label="delta_phi"), dummy_mask(*D.shape)


# -- batched pipeline ----------------------------------------------------------


def forward_batch(delta: np.ndarray, params: S2dtwParams) -> dict:
    """Run the configured pipeline on ``(P, n, m)`` distances; returns a cache dict."""
    delta = np.asarray(delta, dtype=np.float64)
    if np.any(np.isnan(delta)):
        raise NumericError("NaN in distance matrix")
    g = params.gamma
    cache = {"delta": delta}
    stages = ["merge", "smooth"] if params.order == MERGE_FIRST else ["smooth", "merge"]
    stages = [
        s for s in stages if (s == "merge" and params.weak) or (s == "smooth" and params.smoothing)
    ]
    x = delta
    for stage in stages:
        if stage == "smooth":
            cache["smooth_in"] = x
            x, cache["smooth_s"] = smooth_batch(x, g)
            cache["delta_hat"] = x
        else:
            x = merge_batch(x, params.dummy_cost)
    # without smoothing, delta_hat is just the matrix smoothing would have seen
    if "delta_hat" not in cache:
        cache["delta_hat"] = x if params.order == MERGE_FIRST else delta
    cache["stages"] = stages
    R, S = soft_dp_forward(x, g)
    cache.update(dp_input=x, R=R, S=S, cost=R[:, -1, -1].copy())
    return cache


def backward_batch(cache: dict, params: S2dtwParams, upstream=None):
    """Return ``(grad_delta, grad_cum)``; ``upstream`` scales each pair's cost gradient."""
    g = params.gamma
    grad_cum = soft_dp_backward(cache["R"], cache["S"], g)
    if upstream is not None:
        grad_cum = grad_cum * np.asarray(upstream, dtype=np.float64)[:, None, None]
    grad = grad_cum
    for stage in reversed(cache["stages"]):
        if stage == "smooth":
            grad = smooth_backward(cache["smooth_in"], cache["smooth_s"], grad, g)
        elif stage == "merge":
            grad = grad[:, 1::2, 1::2]
    return grad, grad_cum


# -- single pair API -------------------------------------------------------------


def _result_from_cache(cache: dict, params: S2dtwParams, k: int = 0) -> S2dtwResult:
    n, m = cache["delta"].shape[1:]
    N, M = cache["dp_input"].shape[1:]
    mask = dummy_mask(n, m) if params.weak else np.zeros((N, M), dtype=bool)
    single = {
        "delta": cache["delta"][k : k + 1],
        "dp_input": cache["dp_input"][k : k + 1],
        "R": cache["R"][k : k + 1],
        "S": cache["S"][k : k + 1],
        "stages": cache["stages"],
    }
    if "smooth_s" in cache:
        single["smooth_in"] = cache["smooth_in"][k : k + 1]
        single["smooth_s"] = cache["smooth_s"][k : k + 1]
    return S2dtwResult(
        cost=float(cache["cost"][k]),
        delta=cache["delta"][k],
        delta_hat=cache["delta_hat"][k],
        dp_input=cache["dp_input"][k],
        cum=cache["R"][k, 1:, 1:],
        dummy_mask=mask,
        params=params,
        _cache=single,
    )


def s2dtw_forward_delta(delta, params: S2dtwParams = S2dtwParams()) -> S2dtwResult:
    D = delta.values if isinstance(delta, DistanceMatrix) else np.asarray(delta, dtype=np.float64)
    if D.ndim != 2:
        raise DimensionError(f"expected a 2-d distance matrix, got shape {D.shape}")
    return _result_from_cache(forward_batch(D[None], params), params)


def s2dtw_forward(X: FeatureSequence, Y: FeatureSequence, params: S2dtwParams = S2dtwParams()) -> S2dtwResult:
    if X.d != Y.d:
        raise DimensionError(f"dimension mismatch: {X.d} vs {Y.d}")
    X.check_measure(params.measure)
    Y.check_measure(params.measure)
    return s2dtw_forward_delta(distance_array(X.items, Y.items, params.measure), params)


def s2dtw_backward(result: S2dtwResult, params: S2dtwParams | None = None) -> S2dtwResult:
    if result._cache is None:
        raise StateError("result carries no forward state")
    params = result.params if params is None else params
    grad_delta, grad_cum = backward_batch(result._cache, params)
    return dataclasses.replace(result, grad_cum=grad_cum[0], grad_delta=grad_delta[0])


def s2dtw(X: FeatureSequence, Y: FeatureSequence, params: S2dtwParams = S2dtwParams()) -> S2dtwResult:
    """Forward and backward in one call."""
    return s2dtw_backward(s2dtw_forward(X, Y, params), params)


def grad_wrt_embeddings(result: S2dtwResult, X, Y, measure=None):
    """Chain ``grad_delta`` through the distance measure to every item."""
    if not result.has_gradients:
        raise StateError("run s2dtw_backward first")
    measure = result.params.measure if measure is None else measure
    Xa = X.items if isinstance(X, FeatureSequence) else np.asarray(X, dtype=np.float64)
    Ya = Y.items if isinstance(Y, FeatureSequence) else np.asarray(Y, dtype=np.float64)
    return distance_grads(Xa, Ya, result.grad_delta, measure)


def path_matrix(result: S2dtwResult, variant: str = "s2dtw") -> np.ndarray:
    """Gradient-based soft path on the raw grid, scaled down to a peak of 1 when it exceeds 1.

    Soft-DTW occupancies already peak at exactly 1 (the terminal cell), while
    smoothing can push S2DTW entries above 1. Matrices that never reach 1,
    such as a pair whose elements are all skipped, are left as they are.

    ``variant="softdtw"`` reruns plain Soft-DTW on ``result.delta`` at the
    same gamma.
    """
    if variant == "s2dtw":
        if not result.has_gradients:
            raise StateError("run s2dtw_backward first")
        M = result.grad_delta
    elif variant == "softdtw":
        params = S2dtwParams.softdtw(result.params.gamma, result.params.measure)
        M = s2dtw_backward(s2dtw_forward_delta(result.delta, params)).grad_delta
    else:
        raise ArgumentError(f"unknown variant {variant!r}")
    peak = np.abs(M).max()
    return M / peak if peak > 1 else M.copy()


# -- many pairs at once -----------------------------------------------------------


def align_pairs(
    Xs: Sequence[np.ndarray],
    Ys: Sequence[np.ndarray],
    params: S2dtwParams,
    upstream: Sequence[float] | None = None,
    with_grad: bool = True,
):
    """Costs (and embedding gradients) for pairs ``(Xs[k], Ys[k])``.

    Pairs are grouped by shape and each group runs as one batch. When
    ``upstream`` is given, returned gradients are already scaled by it.
    Returns ``(costs, gXs, gYs)``; the gradient lists are None without grads.
    """
    P = len(Xs)
    if len(Ys) != P:
        raise ArgumentError("Xs and Ys differ in length")
    costs = np.empty(P)
    gXs: list = [None] * P
    gYs: list = [None] * P
    groups: dict = {}
    for k, (x, y) in enumerate(zip(Xs, Ys)):
        groups.setdefault((x.shape, y.shape), []).append(k)
    for idx in groups.values():
        Xb = np.stack([Xs[k] for k in idx])
        Yb = np.stack([Ys[k] for k in idx])
        delta = distance_array(Xb, Yb, params.measure)
        cache = forward_batch(delta, params)
        costs[idx] = cache["cost"]
        if with_grad:
            up = None if upstream is None else np.asarray(upstream, dtype=np.float64)[idx]
            grad_delta, _ = backward_batch(cache, params, up)
            gX, gY = distance_grads(Xb, Yb, grad_delta, params.measure)
            for t, k in enumerate(idx):
                gXs[k] = gX[t]
                gYs[k] = gY[t]
    if not np.all(np.isfinite(costs)):
        raise NumericError("non-finite alignment cost")
    if not with_grad:
        return costs, None, None
    return costs, gXs, gYs
