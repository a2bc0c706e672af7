"""Small reproducible experiments shared by the acceptance suite and scripts/."""

from __future__ import annotations

import dataclasses

from .s2dtw import S2dtwParams, s2dtw_backward, s2dtw_forward_delta
from .seqcore import distance_array
from .synth import ModalityMaps, ScenarioSpec, generate_pair, make_corpus
from .trainer import EncoderParams, TrainConfig, mean_r1, train

# skipped captions are drawn at least this far beyond the dummy cost
SKIP_MARGIN = 0.5


def skip_case(kind: str, seed: int, n: int = 5, dummy_cost: float = 0.5, gamma: float = 0.1, order: str = "smooth-first") -> dict:
    """One synthetic pair seen through the oracle encoder, aligned with and without dummies.

    Returns both gradient matrices and the mass they put on irrelevant captions.
    """
    spec = ScenarioSpec(
        kind=kind,
        n=n,
        m=n,
        irrelevant_rate=1.0 / n,
        min_irrelevant_distance=dummy_cost + SKIP_MARGIN,
        seed=seed,
    )
    maps = ModalityMaps.from_seed(spec.map_seed, spec.d_raw, spec.latent_dim)
    X, Y, gt = generate_pair(spec, maps)
    enc = EncoderParams.oracle(maps)
    delta = distance_array(enc.clips(X.items), enc.captions(Y.items), "cosine_dist")
    ours = s2dtw_backward(s2dtw_forward_delta(delta, S2dtwParams(gamma=gamma, dummy_cost=dummy_cost, order=order)))
    soft = s2dtw_backward(s2dtw_forward_delta(delta, S2dtwParams.softdtw(gamma)))
    cols = [j - 1 for j in gt.irrelevant_captions]
    return {
        "seed": seed,
        "delta": delta,
        "m_hat": ours.grad_delta,
        "m_soft": soft.grad_delta,
        "irrelevant_captions": gt.irrelevant_captions,
        "s2dtw_mass": float(ours.grad_delta[:, cols].sum()),
        "softdtw_mass": float(soft.grad_delta[:, cols].sum()),
        "s2dtw_total": float(ours.grad_delta.sum()),
        "softdtw_total": float(soft.grad_delta.sum()),
        "min_irrelevant_distance": float(delta[:, cols].min()) if cols else None,
    }


def collapse_pair(seed: int, steps: int = 1000, lr: float = 0.05) -> dict:
    """Positives-only versus full contrastive training on the same corpus, seed and budget."""
    corpus = make_corpus([ScenarioSpec("sequential", n=4, m=4)], [32], [16], seed=seed)
    base = TrainConfig(steps=steps, lr=lr, seed=seed)
    pos = train(corpus, dataclasses.replace(base, loss_form="positives_only", negatives="none"))
    full = train(corpus, base)
    return {
        "seed": seed,
        "positives_only": pos.final["collapse"],
        "full": full.final["collapse"],
        "positives_only_R@1": mean_r1(pos.final),
        "full_R@1": mean_r1(full.final),
    }


def end_to_end(seed: int, steps: int = 500) -> dict:
    """Full method on a noiseless sequential corpus; initial and final test retrieval."""
    corpus = make_corpus([ScenarioSpec("sequential", n=4, m=4)], [32], [16], seed=seed)
    rep = train(corpus, TrainConfig(steps=steps, batch_size=8, d_emb=8, seed=seed))
    return {"seed": seed, "initial": rep.initial, "final": rep.final, "candidates": len(corpus.test)}
