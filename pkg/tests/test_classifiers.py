import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import param
from dir_intent import tensor as tn
from dir_intent.classifiers import (CapsuleParams, compatibility_scores, cosine_matrix, dynamic_routing,
                                    linear_classify, squash)
from dir_intent.errors import ShapeError
from dir_intent.gradcheck import check_gradients


def test_linear_classify_examples():
    assert np.allclose(linear_classify(np.zeros((3, 4)), np.ones((4, 2))).data, [0.5, 0.5])
    p = linear_classify(np.array([[2.0]]), np.array([[1.0, -1.0]])).data
    assert np.round(p, 3).tolist() == [0.982, 0.018]
    with pytest.raises(ShapeError):
        linear_classify(np.zeros((1, 4)), np.zeros((4, 3)), K=2)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 4), elements=st.floats(-5, 5)), arrays(np.float64, (4, 5), elements=st.floats(-5, 5)))
def test_linear_classify_sums_to_one(H, W):
    assert abs(linear_classify(H, W).data.sum() - 1) <= 1e-12


def test_squash_examples():
    assert np.array_equal(squash(np.zeros(3)).data, np.zeros(3))
    assert tn.l2norm(squash(np.array([0.6, 0.8]))).item() == pytest.approx(0.5, abs=1e-15)
    big = squash(np.array([100.0, 0.0])).data
    assert np.linalg.norm(big) > 0.9999


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 4, elements=st.floats(-1e3, 1e3)))
def test_squash_keeps_direction_and_norm_below_one(s):
    v = squash(s).data
    n, nv = math.hypot(*s), math.hypot(*v)  # hypot rescales, so tiny vectors do not underflow
    assert nv < 1
    assert np.isclose(nv, n * n / (1 + n * n), rtol=1e-12, atol=1e-300)
    if n > 1e-6:
        assert np.allclose(v / nv, s / n, atol=1e-9)


def caps(rng, K, R, D, D_C, iters=3):
    return CapsuleParams(tn.Tensor(rng.normal(size=(K, R, D, D_C)), requires_grad=True), iters)


def test_routing_coefficients_sum_to_one(rng):
    params = caps(rng, 4, 3, 5, 2)
    res = dynamic_routing(rng.normal(size=(6, 3, 5)), params)
    assert np.allclose(res.c.data.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(res.norms.data < 1)


def test_routing_single_route(rng):
    params = caps(rng, 1, 1, 3, 2)
    m = rng.normal(size=(1, 3))
    res = dynamic_routing(m, params)
    expect = squash(m[0] @ params.W.data[0, 0]).data
    assert np.allclose(res.v.data[0], expect, atol=1e-15)


def test_routing_one_iteration_hand_trace(rng):
    params = caps(rng, 2, 2, 3, 2, iters=1)
    m = rng.normal(size=(2, 3))
    res = dynamic_routing(m, params)
    assert np.allclose(res.c.data, 0.5)
    for k in range(2):
        u = [m[r] @ params.W.data[k, r] for r in range(2)]
        assert np.allclose(res.v.data[k], squash(0.5 * (u[0] + u[1])).data, atol=1e-15)


def test_routing_symmetry_with_shared_predictions(rng):
    W = rng.normal(size=(1, 3, 4, 2))
    params = CapsuleParams(tn.constant(np.repeat(W, 5, axis=0)), 3)
    res = dynamic_routing(rng.normal(size=(3, 4)), params)
    assert np.allclose(res.v.data, res.v.data[0], atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_routing_gradients(seed):
    r = np.random.default_rng(seed)
    params = caps(r, 3, 2, 3, 2)
    heads = param(r, 2, 2, 3)
    L = r.uniform(0, 1, size=(3, 2))
    assert check_gradients(lambda: tn.sum_(dynamic_routing(heads, params).norms), [params.W, heads], rng=r) < 1e-4
    assert check_gradients(lambda: tn.sum_(dynamic_routing(heads, params, L).norms), [params.W, heads],
                           rng=r) < 1e-4


def test_compatibility_examples():
    v = np.array([0.3, -1.2, 2.0])
    assert compatibility_scores(v, np.stack([v, -v])).data[0] == pytest.approx(1.0, abs=1e-15)
    assert compatibility_scores(np.array([1.0, 0.0]), np.array([[0.0, 3.0]])).data[0] == 0.0
    assert compatibility_scores(np.array([1.0, 0.0]), np.array([[1.0, 1.0]])).data[0] == pytest.approx(
        1 / np.sqrt(2), abs=1e-12)
    with pytest.raises(ValueError):
        compatibility_scores(np.zeros(2), np.array([[1.0, 1.0]]))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 3, elements=st.floats(0.1, 5)), arrays(np.float64, (4, 3), elements=st.floats(0.1, 5)),
       st.floats(0.01, 100))
def test_cosine_scale_invariant(u, labels, alpha):
    a = compatibility_scores(u, labels).data
    assert np.allclose(compatibility_scores(alpha * u, labels).data, a, atol=1e-9)
    assert np.allclose(compatibility_scores(u, alpha * labels).data, a, atol=1e-9)
    assert np.all(np.abs(a) <= 1 + 1e-12)


def test_cosine_gradients(rng):
    u, lab = param(rng, 3, 4), param(rng, 5, 4)
    assert check_gradients(lambda: tn.sum_(tn.square(cosine_matrix(u, lab))), [u, lab]) < 1e-4
