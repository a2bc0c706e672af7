import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from weakalign.errors import ArgumentError, DegenerateVectorError, TrainingDivergedError
from weakalign.gradcheck import central_difference, relative_error
from weakalign.synth import ScenarioSpec, make_corpus, mixed_specs
from weakalign.trainer import (
    ABLATION_BASE,
    ABLATION_COLUMNS,
    EncoderParams,
    TrainConfig,
    ablation_configs,
    ablation_csv,
    collapse_metric,
    evaluate_retrieval,
    mean_r1,
    ranks_from_costs,
    retrieval_metrics,
    run_ablation,
    train,
    train_step,
)


@pytest.fixture(scope="module")
def small_corpus():
    return make_corpus([ScenarioSpec(noise=0.1)], [8], [5], seed=3)


class TestEncoders:
    def test_shapes(self):
        e = EncoderParams.init(16, 5, seed=1)
        assert e.clip_W.shape == (5, 16) and e.caption_b.shape == (5,)
        assert e.clips(np.ones((3, 16))).shape == (3, 5)

    def test_oracle_recovers_topics(self):
        c = make_corpus([ScenarioSpec()], [3], seed=0)
        enc = EncoderParams.oracle(c.maps)
        for p in c.train:
            np.testing.assert_allclose(enc.clips(p.X.items), enc.captions(p.Y.items), atol=1e-10)

    def test_copy_is_deep(self):
        e = EncoderParams.init(4, 2)
        f = e.copy()
        f.clip_W += 1
        assert not np.array_equal(e.clip_W, f.clip_W)


class TestRetrieval:
    def test_unique_minimum(self):
        C = np.full((6, 6), 2.0)
        np.fill_diagonal(C, 1.0)
        m = retrieval_metrics(C)
        assert m["t2v"] == {"R@1": 1.0, "R@5": 1.0, "MedR": 1.0} == m["v2t"]

    def test_ties_count_against_the_query(self):
        t2v, v2t = ranks_from_costs(np.ones((5, 5)))
        assert np.all(t2v == 5) and np.all(v2t == 5)

    def test_directions(self):
        C = np.array([[0.0, 1.0, 1.0], [0.5, 1.0, 0.1], [1.0, 1.0, 0.0]])
        t2v, v2t = ranks_from_costs(C)
        # caption 2 is ranked against clips (column 2), clip 2 against captions (row 2)
        assert t2v.tolist() == [1, 3, 1] and v2t.tolist() == [1, 3, 1]

    @given(hnp.arrays(np.float64, (6, 6), elements=st.floats(0, 3)))
    def test_ranges(self, C):
        m = retrieval_metrics(C)
        for d in ("t2v", "v2t"):
            assert 0 <= m[d]["R@1"] <= m[d]["R@5"] <= 1 and m[d]["MedR"] >= 1

    def test_too_few_candidates(self):
        with pytest.raises(ArgumentError):
            retrieval_metrics(np.zeros((4, 4)))
        with pytest.raises(ArgumentError):
            retrieval_metrics(np.zeros((5, 6)))


class TestCollapse:
    def test_examples(self):
        assert collapse_metric(np.ones((4, 3))) == pytest.approx(1.0)
        assert collapse_metric(np.eye(4)) == pytest.approx(0.0)

    def test_errors(self):
        with pytest.raises(DegenerateVectorError):
            collapse_metric(np.array([[1.0, 0], [0, 0]]))
        with pytest.raises(ArgumentError):
            collapse_metric(np.ones((1, 3)))


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            dict(loss_form="hinge"),
            dict(negatives="some"),
            dict(batch_size=1),
            dict(steps=-1),
            dict(lr=-0.1),
            dict(gamma=0.0),
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ArgumentError):
            TrainConfig(**kw)

    def test_single_item_batch_ok_without_contrast(self):
        TrainConfig(batch_size=1, loss_form="positives_only", negatives="none")

    def test_flags_route_to_alignment(self):
        p = TrainConfig(wa=False, ls=True, order="merge-first").s2dtw_params()
        assert not p.weak and p.smoothing and p.order == "merge-first"


class TestTrain:
    def test_zero_learning_rate(self, small_corpus):
        enc = EncoderParams.init(small_corpus.d_raw, 8, seed=0)
        rep = train(small_corpus, TrainConfig(lr=0.0, steps=3), encoders=enc)
        for a, b in zip(enc.arrays(), rep.encoders.arrays()):
            assert np.array_equal(a, b)
        assert rep.final["t2v"] == rep.initial["t2v"] and rep.final["v2t"] == rep.initial["v2t"]

    def test_zero_steps_reports_initial_only(self, small_corpus):
        rep = train(small_corpus, TrainConfig(steps=0))
        assert len(rep.evals) == 1 and rep.losses == [] and rep.evals[0]["step"] == 0

    def test_determinism(self, small_corpus):
        cfg = TrainConfig(steps=5, eval_every=2)
        a, b = train(small_corpus, cfg), train(small_corpus, cfg)
        assert a.to_json() == b.to_json()
        assert [e["step"] for e in a.evals] == [0, 2, 4, 5]
        c = train(small_corpus, dataclasses.replace(cfg, seed=1))
        assert c.losses != a.losses

    def test_losses_finite(self, small_corpus):
        rep = train(small_corpus, TrainConfig(steps=10))
        assert np.all(np.isfinite(rep.losses)) and len(rep.losses) == 10

    def test_divergence(self, small_corpus):
        with pytest.raises(TrainingDivergedError) as info:
            train(small_corpus, TrainConfig(steps=20, lr=1e300))
        assert info.value.step >= 1

    def test_empty_corpus(self):
        c = make_corpus([ScenarioSpec()], [0], seed=0)
        with pytest.raises(ArgumentError):
            train(c, TrainConfig(steps=1))

    @pytest.mark.parametrize("form", ["log_of_sum", "sum_of_logs"])
    def test_parameter_gradients(self, small_corpus, form):
        pairs = small_corpus.train[:2]
        cfg = TrainConfig(gamma=0.5, loss_form=form)
        enc = EncoderParams.init(small_corpus.d_raw, 3, seed=2)
        _, grads = train_step(enc, pairs, cfg)

        def loss_with(name, value):
            e = enc.copy()
            setattr(e, name, value)
            return train_step(e, pairs, cfg)[0]

        for name, g in zip(("clip_W", "clip_b", "caption_W", "caption_b"), grads.arrays()):
            numeric = central_difference(lambda A: loss_with(name, A), getattr(enc, name))
            assert relative_error(g, numeric) <= 1e-4

    def test_small_step_decreases_loss(self, small_corpus):
        pairs = small_corpus.train[:4]
        cfg = TrainConfig()
        enc = EncoderParams.init(small_corpus.d_raw, 8, seed=4)
        loss, grads = train_step(enc, pairs, cfg)
        for lr in (1e-2, 1e-3, 1e-4):
            e = enc.copy()
            for a, g in zip(e.arrays(), grads.arrays()):
                a -= lr * g
            assert train_step(e, pairs, cfg)[0] < loss

    def test_evaluate_needs_five_pairs(self, small_corpus):
        enc = EncoderParams.init(small_corpus.d_raw)
        with pytest.raises(ArgumentError):
            evaluate_retrieval(enc, small_corpus.test[:4], TrainConfig().s2dtw_params())


class TestAblation:
    def test_rows(self):
        rows = ablation_configs(TrainConfig(gamma=0.2))
        assert [r for r, _ in rows] == ["(1)", "(2)", "(3)", "(4)", "(5)", "(6)"]
        cfgs = dict(rows)
        assert not (cfgs["(1)"].ta or cfgs["(1)"].wa or cfgs["(1)"].ls)
        assert [cfgs[r].ta_strategy for r in ("(2)", "(3)", "(4)")] == ["ours", "uniform", "inverse"]
        assert cfgs["(5)"].wa and not cfgs["(5)"].ls
        assert cfgs["(6)"].wa and cfgs["(6)"].ls and cfgs["(6)"].ta
        assert all(cfgs[r].gamma == 0.01 for r in ("(1)", "(2)", "(3)", "(4)"))
        assert cfgs["(5)"].gamma == cfgs["(6)"].gamma == 0.2

    def test_tiny_run_and_csv(self):
        def corpus_fn(seed):
            return make_corpus(mixed_specs(ScenarioSpec(noise=0.3)), [2] * 4, [2] * 4, seed=seed)

        rows = run_ablation(corpus_fn, dataclasses.replace(ABLATION_BASE, steps=2), seeds=(0,))
        text = ablation_csv(rows).splitlines()
        assert text[0] == ",".join(ABLATION_COLUMNS) and len(text) == 7
        assert all(0 <= r["R@1"] <= 1 for r in rows)
        assert rows[0]["R@1"] == mean_r1(rows[0]["reports"][0].final)
