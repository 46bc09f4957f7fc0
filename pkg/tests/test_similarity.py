import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dir_intent.corpus import EmbeddingTable, LabelSet
from dir_intent.errors import ConfigError, DataError
from dir_intent.similarity import (IntentRepresentations, SimilarityConfig, average_by_intent,
                                   build_similarity_matrix, distance_matrix, embedding_similarity_baseline,
                                   identity_similarity, intent_distance)

DEFAULT = SimilarityConfig()


def test_intent_distance_examples():
    g = np.array([1.0, 2.0])
    assert intent_distance(g, g) == 0.0
    assert intent_distance(np.array([3.0, 4.0]), np.zeros(2), sigma=1) == 25.0
    assert intent_distance(np.array([3.0, 4.0]), np.zeros(2), sigma=2) == 6.25


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (2, 5), elements=st.floats(-10, 10)), st.floats(0.01, 10))
def test_distance_symmetry_and_scaling(g, c):
    d = intent_distance(g[0], g[1])
    assert d == intent_distance(g[1], g[0]) and d >= 0
    assert intent_distance(g[0], g[0]) == 0
    assert np.isclose(intent_distance(c * g[0], c * g[1]), c * c * d, rtol=1e-9, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (5, 3), elements=st.floats(-5, 5), unique=True), st.floats(0.1, 10))
def test_scaling_keeps_nearest_neighbour(g, c):
    def nearest(v):
        d = distance_matrix(v)
        np.fill_diagonal(d, np.inf)
        return d.argmin(axis=1)

    if len({tuple(r) for r in g}) == len(g):
        assert np.array_equal(nearest(g), nearest(c * g))


def test_average_by_intent():
    vecs = np.array([[0.0, 0.0], [2.0, 4.0], [1.0, 1.0], [1.0, 1.0]])
    reps = average_by_intent(vecs, [0, 0, 1, 1], 2, 1)
    assert reps.g.tolist() == [[1.0, 2.0], [1.0, 1.0]]
    assert reps.counts.tolist() == [2, 2]
    with pytest.raises(DataError):
        average_by_intent(vecs, [0, 0, 0, 0], 2, 1)


def reps(g, I):
    return IntentRepresentations(np.asarray(g, dtype=float), np.ones(len(g), dtype=int), I)


def test_similarity_shapes_and_diagonal(rng):
    r = reps(rng.normal(size=(5, 4)), 3)
    Lg = build_similarity_matrix(r, "gzsl", DEFAULT)
    Lz = build_similarity_matrix(r, "zsl", DEFAULT)
    assert Lg.shape == (5, 5) and Lz.shape == (5, 2)
    assert np.array_equal(Lg.argmax(axis=1), np.arange(5))
    assert np.allclose(Lg.sum(axis=1), 1, atol=1e-12) and np.allclose(Lz.sum(axis=1), 1, atol=1e-12)


def test_identical_reps_give_uniform_rows():
    L = build_similarity_matrix(reps(np.ones((4, 3)), 2), "gzsl", DEFAULT)
    assert np.allclose(L, 0.25, atol=1e-15)


def test_unnormalised_kernel_and_config_errors():
    g = [[0.0], [1.0], [3.0]]
    L = build_similarity_matrix(reps(g, 1), "gzsl", SimilarityConfig(tau=2.0, row_normalize=False))
    assert L[0, 1] == pytest.approx(np.exp(-0.5)) and L[0, 2] == pytest.approx(np.exp(-4.5))
    neg = build_similarity_matrix(reps(g, 1), "gzsl", SimilarityConfig(kernel="neg-distance", row_normalize=False))
    assert neg[0].tolist() == [-0.0, -1.0, -9.0]
    for bad in (dict(sigma=0), dict(tau=-1), dict(kernel="neg-distance"), dict(kernel="cosine")):
        with pytest.raises(ConfigError):
            SimilarityConfig(**bad)


def test_default_tau_is_mean_off_diagonal_distance():
    g = np.array([[0.0], [1.0], [2.0]])
    d = distance_matrix(g)
    tau = d[~np.eye(3, dtype=bool)].mean()
    L = build_similarity_matrix(reps(g, 1), "gzsl", SimilarityConfig(row_normalize=False))
    assert np.allclose(L, np.exp(-d / tau), atol=1e-15)


def orthogonal_table(words):
    return EmbeddingTable(len(words), {w: np.eye(len(words))[i] for i, w in enumerate(words)})


def test_embedding_baseline_shared_tokens_rank_higher():
    labels = LabelSet(("BookRestaurant", "PlayMusic"), ("RateBook",))
    table = orthogonal_table(["book", "restaurant", "play", "music", "rate"])
    for cfg in (DEFAULT, SimilarityConfig(row_normalize=False), SimilarityConfig(tau=0.3)):
        L = embedding_similarity_baseline(labels, table, cfg, "gzsl")
        assert L[0, 2] > L[0, 1]  # BookRestaurant ~ RateBook beats PlayMusic
        assert L.shape == (3, 3)
    assert embedding_similarity_baseline(labels, table, DEFAULT, "zsl").shape == (3, 1)


def test_embedding_baseline_identical_token_sets_hit_row_maximum():
    labels = LabelSet(("BookRestaurant",), ("RestaurantBook", "PlayMusic"))
    table = orthogonal_table(["book", "restaurant", "play", "music"])
    L = embedding_similarity_baseline(labels, table, SimilarityConfig(row_normalize=False), "gzsl")
    assert L[0, 1] == L[0, 0] == 1.0 == L[0].max()


def test_identity_similarity():
    assert np.array_equal(identity_similarity(4, 2, "gzsl"), np.eye(4))
    assert np.array_equal(identity_similarity(4, 2, "zsl"), np.eye(4)[:, 2:])
