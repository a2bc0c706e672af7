"""Acceptance criteria 1-10.

Every test records one PASS/FAIL line through the ``criterion`` fixture; the
lines are repeated in a summary section at the end of the pytest run.
"""

import math
import time

import numpy as np
import pytest

from weakalign.augment import count_windowed, distribution_from_self_distances, windowed_permutations
from weakalign.dtw import dtw, dtw_bruteforce, softdtw_forward
from weakalign.experiments import collapse_pair, end_to_end, skip_case
from weakalign.gradcheck import TOLERANCE, central_difference, relative_error, run_gradcheck
from weakalign.loss import batch_loss, contrastive_from_costs, negative_mask
from weakalign.s2dtw import S2dtwParams, insert_dummies, s2dtw_forward_delta, smooth
from weakalign.seqcore import FeatureSequence, self_similarity
from weakalign.trainer import ABLATION_BASE, ABLATION_CORPUS, ablation_corpus, run_ablation

SEEDS_10 = range(10)


def random_deltas(count, max_side, seed):
    rng = np.random.default_rng(seed)
    return [rng.random(tuple(rng.integers(1, max_side + 1, size=2))) for _ in range(count)]


DELTAS_6 = random_deltas(500, 6, seed=2024)


@pytest.fixture(scope="module", autouse=True)
def warm_up():
    # jit compilation of the brute-force oracle is not part of any runtime budget
    dtw_bruteforce(np.ones((2, 2)))


def test_1_dtw_matches_bruteforce(criterion):
    t0 = time.perf_counter()
    mismatches = sum(dtw(D)[0] != dtw_bruteforce(D)[0] for D in DELTAS_6)
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 5
    assert criterion(1, ok, f"{mismatches}/500 mismatches, {elapsed:.2f}s (limit 5s)")


def test_2_soft_limit(criterion):
    t0 = time.perf_counter()
    gap = 0.0
    above = 0
    for D in DELTAS_6:
        hard = dtw(D)[0]
        gap = max(gap, abs(softdtw_forward(D, 1e-4)[0] - hard))
        above += sum(softdtw_forward(D, g)[0] > hard for g in (0.01, 0.1, 1.0))
    elapsed = time.perf_counter() - t0
    ok = gap <= 1e-3 and above == 0 and elapsed < 5
    assert criterion(2, ok, f"max |soft-hard| {gap:.2e} (<=1e-3), {above} soft>hard, {elapsed:.2f}s (limit 5s)")


def test_3_s2dtw_forward_oracle(criterion):
    gamma, dummy = 1e-4, 0.5
    t0 = time.perf_counter()
    worst = 0.0
    for D in random_deltas(200, 5, seed=7):
        ours = s2dtw_forward_delta(D, S2dtwParams(gamma=gamma, dummy_cost=dummy)).cost
        augmented, _ = insert_dummies(smooth(D, gamma), dummy)
        worst = max(worst, abs(ours - dtw_bruteforce(augmented)[0]))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-3 and elapsed < 30
    assert criterion(3, ok, f"max |s2dtw - bruteforce| {worst:.2e} (<=1e-3), {elapsed:.2f}s (limit 30s)")


def test_4_gradients(criterion):
    t0 = time.perf_counter()
    rep = run_gradcheck(trials=100)
    elapsed = time.perf_counter() - t0
    err = max(rep.max_delta_error, rep.max_embedding_error)
    ok = err <= TOLERANCE and elapsed < 60
    assert criterion(4, ok, f"max relative error {err:.2e} (<=1e-4) over 100 instances, {elapsed:.2f}s (limit 60s)")


def test_5_weak_alignment_skip(criterion):
    partial = [skip_case("partial_irrelevant", s) for s in SEEDS_10]
    entire = [skip_case("entire_irrelevant", s) for s in SEEDS_10]
    n = 5
    p_ours = max(r["s2dtw_mass"] for r in partial)
    p_soft = min(r["softdtw_mass"] for r in partial)
    e_ours = max(r["s2dtw_total"] for r in entire)
    e_soft = [r["softdtw_total"] for r in entire]
    margin_ok = all(r["min_irrelevant_distance"] >= 1.0 for r in partial + entire)
    soft_near_n = all(abs(t - n) <= 0.05 * n for t in e_soft)
    ok = margin_ok and p_ours < 0.05 and p_soft > 0.2 and e_ours < 0.05 and soft_near_n
    assert criterion(
        5,
        ok,
        f"partial: S2DTW column mass max {p_ours:.4f} (<0.05), Soft-DTW min {p_soft:.3f} (>0.2); "
        f"entire: S2DTW total max {e_ours:.4f} (<0.05), Soft-DTW total in [{min(e_soft):.3f}, {max(e_soft):.3f}] (~{n})",
    )


def test_6_augmentation_distribution(criterion):
    rng = np.random.default_rng(6)
    sum_err = 0.0
    identity_modes = 0
    tv = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 7))
        S = self_similarity(FeatureSequence(rng.standard_normal((n, 4)))).values
        dist = distribution_from_self_distances(S, 1, 0.1)
        sum_err = max(sum_err, abs(dist.probs.sum() - 1.0))
        identity_modes += dist.prob(tuple(range(1, n + 1))) == dist.probs.max()
        flat = distribution_from_self_distances(S, 1, 1e6).probs
        tv = max(tv, 0.5 * np.abs(flat - 1.0 / flat.size).sum())
    sizes = (len(windowed_permutations(3, 1)), len(windowed_permutations(4, 1)))
    counts = (count_windowed(3, 1), count_windowed(4, 1))
    ok = sum_err <= 1e-12 and identity_modes == 100 and sizes == (3, 5) and counts == sizes and tv <= 1e-3
    assert criterion(
        6,
        ok,
        f"|sum-1| {sum_err:.1e} (<=1e-12), identity mode {identity_modes}/100, "
        f"|T(3,1)|={sizes[0]} |T(4,1)|={sizes[1]}, TV at tau=1e6 {tv:.1e} (<=1e-3)",
    )


def _loss(C, form):
    return contrastive_from_costs(C, negative_mask(len(C)), form)[0]


def test_7_loss_sanity(criterion):
    rng = np.random.default_rng(7)
    single = batch_loss([(rng.standard_normal((3, 3)), rng.standard_normal((2, 3)))]).loss
    equal = max(abs(_loss(np.full((B, B), 0.8), "log_of_sum")) for B in (2, 3, 5, 8))

    violations = 0
    for _ in range(300):
        B = int(rng.integers(2, 6))
        C = rng.random((B, B)) * 3
        i, j = rng.choice(B, size=2, replace=False)
        eps = rng.uniform(0.01, 1.0)
        for form in ("log_of_sum", "sum_of_logs"):
            base = _loss(C, form)
            pos, neg = C.copy(), C.copy()
            pos[i, i] -= eps
            neg[i, j] += eps
            violations += _loss(pos, form) > base + 1e-12
            violations += _loss(neg, form) > base + 1e-12

    fd = 0.0
    params = S2dtwParams(gamma=0.5)
    for _ in range(10):
        batch = [(rng.standard_normal((rng.integers(1, 4), 3)), rng.standard_normal((rng.integers(1, 4), 3))) for _ in range(2)]
        out = batch_loss(batch, params)
        for k in range(2):
            for side in (0, 1):

                def f(A, k=k, side=side):
                    b = [list(p) for p in batch]
                    b[k][side] = A
                    return batch_loss([tuple(p) for p in b], params).loss

                analytic = (out.grads_X if side == 0 else out.grads_Y)[k]
                fd = max(fd, relative_error(analytic, central_difference(f, batch[k][side])))
    ok = single == 0.0 and equal <= 1e-12 and violations == 0 and fd <= TOLERANCE
    assert criterion(
        7,
        ok,
        f"B=1 loss {single + 0.0}, all-equal loss {equal:.1e}, {violations} monotonicity violations, "
        f"B=2 finite-difference error {fd:.2e} (<=1e-4)",
    )


def test_8_collapse(criterion):
    runs = [collapse_pair(s) for s in range(3)]
    pos = [r["positives_only"] for r in runs]
    full = [r["full"] for r in runs]
    ok = min(pos) > 0.9 and max(full) < 0.5
    assert criterion(
        8,
        ok,
        f"positives-only collapse {[round(v, 3) for v in pos]} (>0.9), full {[round(v, 3) for v in full]} (<0.5), 1000 steps",
    )


def test_9_end_to_end(criterion):
    t0 = time.perf_counter()
    runs = [end_to_end(s) for s in range(3)]
    elapsed = time.perf_counter() - t0
    final = [min(r["final"]["t2v"]["R@1"], r["final"]["v2t"]["R@1"]) for r in runs]
    K = runs[0]["candidates"]
    expected = 1.0 / K
    sigma = math.sqrt(expected * (1 - expected) / K)
    init = [r["initial"][d]["R@1"] for r in runs for d in ("t2v", "v2t")]
    init_ok = all(abs(v - expected) <= 3 * sigma for v in init)
    ok = all(v == 1.0 for v in final) and init_ok and elapsed < 120
    assert criterion(
        9,
        ok,
        f"final R@1 {final} (all 1.0), random-init R@1 {[round(v, 3) for v in init]} "
        f"within {expected:.3f} +/- {3 * sigma:.3f}, {elapsed:.1f}s (limit 120s)",
    )


def test_10_ablation_ordering(criterion):
    t0 = time.perf_counter()
    rows = {r["row"]: r["R@1"] for r in run_ablation(lambda s: ablation_corpus(s, **ABLATION_CORPUS), ABLATION_BASE)}
    elapsed = time.perf_counter() - t0
    ok = rows["(6)"] >= rows["(1)"] and rows["(2)"] >= rows["(4)"] and elapsed < 600
    table = " ".join(f"{k}={v:.3f}" for k, v in rows.items())
    assert criterion(10, ok, f"mean R@1 {table}; need (6)>=(1) and (2)>=(4), {elapsed:.0f}s (limit 600s)")
