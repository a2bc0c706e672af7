"""Central finite-difference checks for the analytic S2DTW gradients.

Relative error of an analytic gradient ``a`` against a numeric one ``f`` is
``max|a - f| / max(max|f|, 1e-6)``: one scale per gradient array. The floor
is the resolution of the oracle itself: a central difference of an O(1) cost
at ``eps = 1e-5`` carries about 1e-11 of rounding noise, so when a whole
gradient is ~1e-7 (every real cell skipped) a purely relative ratio would
measure that noise rather than the analytic gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError
from .s2dtw import S2dtwParams, grad_wrt_embeddings, s2dtw_backward, s2dtw_forward_delta
from .seqcore import distance_array

EPS = 1e-5
TOLERANCE = 1e-4
SCALE_FLOOR = 1e-6


def central_difference(f, x: np.ndarray, eps: float = EPS) -> np.ndarray:
    """Numeric gradient of scalar ``f`` at ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.empty_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for k in range(flat.size):
        old = flat[k]
        flat[k] = old + eps
        up = f(x)
        flat[k] = old - eps
        down = f(x)
        flat[k] = old
        gflat[k] = (up - down) / (2 * eps)
    return g


def relative_error(analytic, numeric) -> float:
    a = np.asarray(analytic, dtype=np.float64)
    f = np.asarray(numeric, dtype=np.float64)
    if a.shape != f.shape:
        raise ArgumentError(f"shape mismatch {a.shape} vs {f.shape}")
    return float(np.abs(a - f).max() / max(np.abs(f).max(), SCALE_FLOOR))


def delta_gradient_error(delta: np.ndarray, params: S2dtwParams, fault: bool = False) -> float:
    """Error of the analytic gradient w.r.t. the raw distance matrix."""
    analytic = s2dtw_backward(s2dtw_forward_delta(delta, params)).grad_delta
    if fault:
        analytic = -analytic
    numeric = central_difference(lambda D: s2dtw_forward_delta(D, params).cost, delta)
    return relative_error(analytic, numeric)


def embedding_gradient_error(X: np.ndarray, Y: np.ndarray, params: S2dtwParams, fault: bool = False) -> float:
    """Worse of the clip-side and caption-side errors."""
    res = s2dtw_backward(s2dtw_forward_delta(distance_array(X, Y, params.measure), params))
    gX, gY = grad_wrt_embeddings(res, X, Y)
    if fault:
        gX, gY = -gX, -gY

    def cost(A, B):
        return s2dtw_forward_delta(distance_array(A, B, params.measure), params).cost

    nX = central_difference(lambda A: cost(A, Y), X)
    nY = central_difference(lambda B: cost(X, B), Y)
    return max(relative_error(gX, nX), relative_error(gY, nY))


@dataclass
class GradcheckReport:
    trials: int
    max_delta_error: float = 0.0
    max_embedding_error: float = 0.0
    tolerance: float = TOLERANCE
    worst: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return max(self.max_delta_error, self.max_embedding_error) <= self.tolerance

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "max_delta_error": self.max_delta_error,
            "max_embedding_error": self.max_embedding_error,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "worst": self.worst,
        }


def run_gradcheck(
    trials: int = 100,
    max_side: int = 5,
    d: int = 3,
    gammas=(0.1, 1.0),
    orders=("smooth-first", "merge-first"),
    dummy_cost: float = 0.5,
    measure: str = "cosine_dist",
    seed: int = 0,
    fault: bool = False,
) -> GradcheckReport:
    """Random instances cycling through every (gamma, order) combination."""
    if trials < 1:
        raise ArgumentError(f"trials must be >= 1, got {trials}")
    if max_side < 1 or d < 1:
        raise ArgumentError("max_side and d must be >= 1")
    rng = np.random.default_rng(seed)
    combos = [(g, o) for g in gammas for o in orders]
    rep = GradcheckReport(trials)
    for t in range(trials):
        gamma, order = combos[t % len(combos)]
        params = S2dtwParams(gamma=gamma, dummy_cost=dummy_cost, measure=measure, order=order)
        n, m = rng.integers(1, max_side + 1, size=2)
        X = rng.standard_normal((n, d))
        Y = rng.standard_normal((m, d))
        e_delta = delta_gradient_error(distance_array(X, Y, measure), params, fault)
        e_emb = embedding_gradient_error(X, Y, params, fault)
        if max(e_delta, e_emb) >= max(rep.max_delta_error, rep.max_embedding_error):
            rep.worst = {"trial": t, "n": int(n), "m": int(m), "gamma": gamma, "order": order}
        rep.max_delta_error = max(rep.max_delta_error, e_delta)
        rep.max_embedding_error = max(rep.max_embedding_error, e_emb)
    return rep
