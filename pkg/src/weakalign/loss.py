"""InfoNCE-style contrastive objective over S2DTW alignment costs.

With ``c[i, j] = S2DTW(X_i, Y_j)`` and ``p[i, j]`` the softmax of ``-c[i, .]``
restricted to ``{i} + N_i``, the loss forms are

* ``log_of_sum``  : ``-log(sum_i p[i, i])`` (default)
* ``sum_of_logs`` : ``-sum_i log p[i, i]``
* ``positives_only`` : ``mean_i c[i, i]``, no contrast at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .augment import augment_pair
from .errors import ArgumentError, DimensionError, NumericError
from .s2dtw import S2dtwParams, align_pairs
from .seqcore import FeatureSequence, check_permutation

LOSS_FORMS = ("log_of_sum", "sum_of_logs", "positives_only")


@dataclass(frozen=True)
class AugConfig:
    w: int = 1
    tau: float = 0.1
    strategy: str = "ours"


@dataclass
class LossOutput:
    loss: float
    costs: np.ndarray  # (B, B); diagonal holds the positives
    ratios: np.ndarray  # p[i, i]
    grad_costs: np.ndarray  # dL / dc
    grads_X: list
    grads_Y: list
    perms: tuple | None = None

    @property
    def positives(self) -> np.ndarray:
        return np.diag(self.costs).copy()

    def to_json(self) -> dict:
        return {
            "loss": self.loss,
            "costs": self.costs.tolist(),
            "ratios": self.ratios.tolist(),
        }


def negative_mask(B: int, policy: str | Callable = "all") -> np.ndarray:
    """Boolean ``(B, B)`` mask, True where ``j`` is a negative for ``i``."""
    if policy == "all":
        mask = ~np.eye(B, dtype=bool)
    elif policy == "none":
        mask = np.zeros((B, B), dtype=bool)
    elif callable(policy):
        mask = np.zeros((B, B), dtype=bool)
        for i in range(B):
            for j in policy(i + 1, B):
                mask[i, j - 1] = True
        np.fill_diagonal(mask, False)
    else:
        raise ArgumentError(f"unknown negative policy {policy!r}")
    return mask


def negative_set(i: int, B: int, policy: str | Callable = "all") -> list[int]:
    """1-based negatives of batch member ``i``."""
    if B < 1:
        raise ArgumentError("empty batch")
    if not 1 <= i <= B:
        raise ArgumentError(f"index {i} out of range 1..{B}")
    return [int(j) + 1 for j in np.flatnonzero(negative_mask(B, policy)[i - 1])]


def contrastive_from_costs(C: np.ndarray, mask: np.ndarray, loss_form: str = "log_of_sum"):
    """Loss, per-row positive ratios and ``dL/dC`` from a cost matrix."""
    C = np.asarray(C, dtype=np.float64)
    B = C.shape[0]
    if loss_form not in LOSS_FORMS:
        raise ArgumentError(f"loss_form must be one of {LOSS_FORMS}")
    if loss_form == "positives_only":
        grad = np.eye(B) / B
        return float(np.trace(C) / B), np.ones(B), grad
    active = mask | np.eye(B, dtype=bool)
    logits = np.where(active, -C, -np.inf)
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    p = w / w.sum(axis=1, keepdims=True)
    ratios = np.diag(p).copy()
    eye = np.eye(B)
    if loss_form == "sum_of_logs":
        loss = -float(np.sum(np.log(ratios)))
        grad = eye - p
    else:
        S = ratios.sum()
        loss = -float(np.log(S))
        grad = ratios[:, None] * (eye - p) / S
    grad = np.where(active, grad, 0.0)
    return loss, ratios, grad


def _arrays(batch):
    Xs, Ys = [], []
    for X, Y in batch:
        Xs.append(X.items if isinstance(X, FeatureSequence) else np.asarray(X, dtype=np.float64))
        Ys.append(Y.items if isinstance(Y, FeatureSequence) else np.asarray(Y, dtype=np.float64))
    return Xs, Ys


def batch_loss(
    batch: Sequence[tuple],
    params: S2dtwParams = S2dtwParams(),
    aug: AugConfig | None = None,
    rng=None,
    loss_form: str = "log_of_sum",
    negatives: str | Callable = "all",
    perms: tuple[list, list] | None = None,
) -> LossOutput:
    """Contrastive loss and gradients w.r.t. every item of every sequence.

    ``perms`` (1-based permutations for clips and captions) overrides ``aug``;
    either way gradients are returned in the original, unshuffled order.
    """
    B = len(batch)
    if B == 0:
        raise ArgumentError("empty batch")
    Xs, Ys = _arrays(batch)
    d = Xs[0].shape[1]
    if any(x.shape[1] != d for x in Xs) or any(y.shape[1] != d for y in Ys):
        raise DimensionError("all sequences in a batch must share the embedding dimension")
    if perms is None and aug is not None:
        rng = np.random.default_rng(rng)
        pX, pY = [], []
        for x, y in zip(Xs, Ys):
            _, _, px, py = augment_pair(
                FeatureSequence(x), FeatureSequence(y), aug.w, aug.tau, rng, params.measure, aug.strategy
            )
            pX.append(px)
            pY.append(py)
        perms = (pX, pY)
    if perms is not None:
        idxX = [check_permutation(p, x.shape[0]) for p, x in zip(perms[0], Xs)]
        idxY = [check_permutation(p, y.shape[0]) for p, y in zip(perms[1], Ys)]
        Xt = [x[ix] for x, ix in zip(Xs, idxX)]
        Yt = [y[iy] for y, iy in zip(Ys, idxY)]
    else:
        Xt, Yt = Xs, Ys

    mask = negative_mask(B, negatives)
    ii, jj = np.meshgrid(np.arange(B), np.arange(B), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    costs, _, _ = align_pairs([Xt[i] for i in ii], [Yt[j] for j in jj], params, with_grad=False)
    C = costs.reshape(B, B)
    if not np.all(np.isfinite(C)):
        raise NumericError("non-finite S2DTW cost in batch")
    loss, ratios, G = contrastive_from_costs(C, mask, loss_form)

    gX = [np.zeros_like(x) for x in Xt]
    gY = [np.zeros_like(y) for y in Yt]
    live = np.flatnonzero(G.ravel() != 0.0)
    if live.size:
        _, gxs, gys = align_pairs(
            [Xt[ii[k]] for k in live], [Yt[jj[k]] for k in live], params, upstream=G.ravel()[live]
        )
        for t, k in enumerate(live):
            gX[ii[k]] += gxs[t]
            gY[jj[k]] += gys[t]
    if perms is not None:
        # X~[k] = X[p(k)], so the gradient of X~[k] belongs to X[p(k)]
        for g, ix in zip(gX, idxX):
            g[ix] = g.copy()
        for g, iy in zip(gY, idxY):
            g[iy] = g.copy()
    return LossOutput(loss, C, ratios, G, gX, gY, perms)
