import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from weakalign.errors import DegenerateVectorError, DimensionError, PermutationError
from weakalign.seqcore import (
    DistanceMatrix,
    DistanceMeasure,
    FeatureSequence,
    apply_permutation,
    distance_array,
    pairwise_distance,
    permutation_matrix,
    self_similarity,
)

from .strategies import sequences

S2 = 1 / np.sqrt(2)


def fs(rows):
    return FeatureSequence(np.array(rows, dtype=float))


def test_orthonormal_pair():
    D = pairwise_distance(fs([(1, 0), (0, 1)]), fs([(1, 0), (0, 1)]))
    np.testing.assert_allclose(D.values, [[0, 1], [1, 0]], atol=1e-15)


def test_antipodal_is_two():
    assert pairwise_distance(fs([(1, 0)]), fs([(-1, 0)])).values[0, 0] == pytest.approx(2.0)


def test_half_angle_value():
    # 1 - cos(45 deg), evaluated independently
    D = pairwise_distance(fs([(1, 0), (S2, S2)]), fs([(0, 1)]))
    np.testing.assert_allclose(D.values, [[1.0], [0.29289321881345254]], atol=1e-15)


def test_self_similarity_examples():
    np.testing.assert_allclose(self_similarity(fs([(1, 0), (0, 1)])).values, [[0, 1], [1, 0]], atol=1e-15)
    assert not self_similarity(fs([(2, 1)] * 4)).values.any()
    S = self_similarity(fs([(1, 0), (S2, S2), (0, 1)])).values
    np.testing.assert_allclose(S, pairwise_distance(fs([(1, 0), (S2, S2), (0, 1)]), fs([(1, 0), (S2, S2), (0, 1)])).values, atol=1e-15)
    a = 1 - S2
    np.testing.assert_allclose(S, [[0, a, 1], [a, 0, a], [1, a, 0]], atol=1e-15)


def test_apply_permutation_examples():
    X = fs([(1, 2), (3, 4)])
    assert np.array_equal(apply_permutation(X, (1, 2)).items, X.items)
    assert np.array_equal(apply_permutation(X, (2, 1)).items, X.items[::-1])


def test_entry_is_one_based():
    D = DistanceMatrix(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert D.entry(1, 2) == 2.0 and D.entry(2, 1) == 3.0


def test_values_are_read_only():
    X = fs([(1, 0)])
    with pytest.raises(ValueError):
        X.items[0, 0] = 5.0


@pytest.mark.parametrize(
    "bad",
    [np.zeros((0, 2)), np.array([[np.nan, 1.0]]), np.zeros((2, 2, 2))],
)
def test_feature_sequence_rejects(bad):
    with pytest.raises(DimensionError):
        FeatureSequence(bad)


def test_errors():
    with pytest.raises(DimensionError):
        pairwise_distance(fs([(1, 0)]), fs([(1, 0, 0)]))
    with pytest.raises(DegenerateVectorError):
        pairwise_distance(fs([(0, 0)]), fs([(1, 0)]))
    with pytest.raises(PermutationError):
        apply_permutation(fs([(1, 0), (0, 1)]), (1, 1))
    with pytest.raises(PermutationError):
        apply_permutation(fs([(1, 0), (0, 1)]), (1, 2, 3))
    with pytest.raises(ValueError):
        DistanceMeasure.parse("euclid")


def test_neg_dot_zero_vector_allowed():
    D = pairwise_distance(fs([(0, 0)]), fs([(1, 0)]), "neg_dot")
    assert D.values[0, 0] == 0.0


@given(sequences(), sequences())
def test_symmetry_and_range(X, Y):
    for measure in DistanceMeasure:
        D = distance_array(X, Y, measure)
        np.testing.assert_allclose(D, distance_array(Y, X, measure).T, atol=1e-12)
    C = distance_array(X, Y, "cosine_dist")
    assert C.min() >= 0.0 and C.max() <= 2.0
    bound = np.linalg.norm(X, axis=1).max() * np.linalg.norm(Y, axis=1).max()
    assert np.abs(distance_array(X, Y, "neg_dot")).max() <= bound * (1 + 1e-12)


@given(sequences(max_n=6), st.randoms(use_true_random=False))
def test_self_similarity_conjugation(X, rnd):
    perm = list(range(1, X.shape[0] + 1))
    rnd.shuffle(perm)
    P = permutation_matrix(perm)
    for measure in DistanceMeasure:
        lhs = self_similarity(apply_permutation(FeatureSequence(X), perm), measure).values
        rhs = P @ self_similarity(FeatureSequence(X), measure).values @ P.T
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_batched_distance_matches_single(rng):
    X = rng.standard_normal((4, 3, 5))
    Y = rng.standard_normal((4, 2, 5))
    B = distance_array(X, Y, "cosine_dist")
    for k in range(4):
        np.testing.assert_allclose(B[k], distance_array(X[k], Y[k], "cosine_dist"))
