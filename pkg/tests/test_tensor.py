import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import param
from dir_intent import tensor as tn
from dir_intent.errors import NumericalError, ShapeError
from dir_intent.gradcheck import check_gradients


def naive_matmul(A, B):
    m, k = A.shape
    _, n = B.shape
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            for t in range(k):
                out[i, j] += A[i, t] * B[t, j]
    return out


def test_matmul_identity():
    B = np.array([[7.0, 1.0], [0.0, 2.0]])
    assert np.array_equal(tn.matmul(np.eye(2), B).data, B)


def test_matmul_hand_value():
    out = tn.matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[5.0], [6.0]]))
    assert out.data.tolist() == [[17.0], [39.0]]


@pytest.mark.parametrize("seed", range(5))
def test_matmul_matches_triple_loop(seed):
    r = np.random.default_rng(seed)
    A, B = r.normal(size=(3, 4)), r.normal(size=(4, 2))
    assert np.allclose(tn.matmul(A, B).data, naive_matmul(A, B), atol=1e-12)


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
        tn.matmul(np.zeros((2, 3)), np.zeros((2, 3)))


def test_matmul_gradient_is_column_sums(rng):
    A, B = param(rng, 3, 4), param(rng, 4, 5)
    grads = tn.backward(tn.sum_(A @ B))
    assert np.allclose(grads[A], np.tile(B.data.sum(axis=1), (3, 1)))
    assert check_gradients(lambda: tn.sum_(A @ B), [A, B]) < 1e-4


def test_batched_matmul_gradient(rng):
    A, B = param(rng, 2, 3, 4), param(rng, 2, 4, 2)
    assert check_gradients(lambda: tn.sum_(tn.square(tn.matmul(A, B))), [A, B]) < 1e-4


def test_softmax_examples():
    assert np.allclose(tn.softmax(np.zeros(3)).data, 1 / 3)
    assert np.allclose(tn.softmax(np.array([0.0, np.log(3.0)])).data, [0.25, 0.75], atol=1e-15)


def test_softmax_empty_raises():
    with pytest.raises(ValueError):
        tn.softmax(np.zeros(0))


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-50, 50)),
       st.floats(-100, 100))
def test_softmax_normalised_and_shift_invariant(x, c):
    p = tn.softmax(x).data
    assert abs(p.sum() - 1.0) <= 1e-12
    assert np.all(p >= 0)
    assert np.allclose(tn.softmax(x + c).data, p, atol=1e-12, rtol=0)


def test_elementwise_examples():
    assert tn.elementwise("tanh", np.array(0.0)).item() == 0.0
    assert tn.elementwise("relu", np.array(-5.0)).item() == 0.0
    assert tn.elementwise("relu", np.array(5.0)).item() == 5.0
    x = tn.tensor(0.0, requires_grad=True)
    assert tn.backward(tn.tanh(x))[x] == pytest.approx(1.0)
    assert check_gradients(lambda: tn.tanh(x), [x]) < 1e-4


def test_scalar_broadcast_only():
    assert np.allclose((tn.constant(np.ones(3)) * 2.0).data, 2.0)
    with pytest.raises(ShapeError):
        tn.add(np.ones(3), np.ones((2, 3)))
    with pytest.raises(ShapeError):
        tn.elementwise("mul", np.ones(2), np.ones(3))


UNARY = ["tanh", "relu", "square", "exp", "sigmoid"]


@pytest.mark.parametrize("op", UNARY)
@pytest.mark.parametrize("seed", range(20))
def test_unary_gradients(op, seed):
    r = np.random.default_rng(seed)
    x = param(r, 4, 3)
    if op == "relu":
        x.data[np.abs(x.data) < 1e-3] = 0.5  # stay away from the kink
    fn = getattr(tn, op)
    w = r.normal(size=(4, 3))
    assert check_gradients(lambda: tn.sum_(fn(x) * w), [x]) < 1e-4


@pytest.mark.parametrize("op", ["add", "sub", "mul", "div"])
@pytest.mark.parametrize("seed", range(20))
def test_binary_gradients(op, seed):
    r = np.random.default_rng(seed)
    a, b = param(r, 3, 2), param(r, 3, 2, lo=0.5, hi=2.0)
    w = r.normal(size=(3, 2))
    fn = getattr(tn, op)
    assert check_gradients(lambda: tn.sum_(fn(a, b) * w), [a, b]) < 1e-4


@pytest.mark.parametrize("seed", range(20))
def test_log_sqrt_scale_gradients(seed):
    r = np.random.default_rng(seed)
    x = param(r, 5, lo=0.5, hi=2.0)
    assert check_gradients(lambda: tn.sum_(tn.log(x) + tn.sqrt(x) + tn.scale(x, -1.5)), [x]) < 1e-4


def test_reduce_examples():
    c = np.full((3, 4), 2.5)
    assert np.allclose(tn.reduce("mean", c, axis=0).data, 2.5)
    assert tn.reduce("l2norm", np.array([3.0, 4.0])).item() == 5.0
    assert tn.reduce("sum", c, axis=1).shape == (3,)
    with pytest.raises(ShapeError):
        tn.reduce("sum", c, axis=2)


def test_max_gradient_is_one_hot(rng):
    x = param(rng, 3, 5)
    g = tn.backward(tn.sum_(tn.max_(x, axis=1)))[x]
    expect = np.zeros((3, 5))
    expect[np.arange(3), x.data.argmax(axis=1)] = 1
    assert np.array_equal(g, expect)
    assert check_gradients(lambda: tn.sum_(tn.max_(x, axis=1)), [x]) < 1e-4


def test_max_ties_route_to_first_index():
    x = tn.tensor([[1.0, 3.0, 3.0]], requires_grad=True)
    assert tn.backward(tn.sum_(tn.max_(x, axis=1)))[x].tolist() == [[0.0, 1.0, 0.0]]


@pytest.mark.parametrize("seed", range(20))
def test_reduction_gradients(seed):
    r = np.random.default_rng(seed)
    x = param(r, 3, 4)
    w = r.normal(size=3)

    def loss():
        return tn.sum_(tn.l2norm(x, axis=1) * w) + tn.mean(x) + tn.sum_(tn.softmax(x, axis=1)[:, 0])

    assert check_gradients(loss, [x]) < 1e-4


def test_backward_examples():
    x = tn.tensor(3.0, requires_grad=True)
    assert tn.backward(x * x)[x] == 6.0
    y = tn.tensor([1.0, 2.0], requires_grad=True)
    const = tn.sum_(y * 0.0) + 4.0
    assert np.array_equal(tn.grads_for(const, [y])[0], np.zeros(2))
    with pytest.raises(ShapeError):
        tn.backward(y * 2.0)


def test_backward_twice_is_bit_identical(rng):
    x = param(rng, 4, 4)
    loss = tn.sum_(tn.tanh(x @ x) * tn.softmax(x, axis=1))
    g1 = tn.backward(loss)[x].copy()
    g2 = tn.backward(loss)[x]
    assert np.array_equal(g1, g2)


def test_graph_visits_each_node_once(rng):
    x = param(rng, 3)
    y = tn.tanh(x)
    z = tn.sum_(y * y + y)  # y is reused three times
    graph = tn.ComputeGraph(z)
    ids = [id(n) for n in graph.nodes]
    assert len(ids) == len(set(ids))
    grads = graph.backward()
    assert all(grads[n].shape == n.shape for n in grads)
    t = np.tanh(x.data)
    assert np.allclose(grads[x], (2 * t + 1) * (1 - t ** 2))


@pytest.mark.parametrize("seed", range(20))
def test_random_three_layer_composition(seed):
    r = np.random.default_rng(seed)
    x, W1, W2 = param(r, 3, 4), param(r, 4, 4), param(r, 4, 2)
    mask = tn.constant(r.uniform(0.5, 1.5, size=(3, 4)))
    acts = [tn.tanh, tn.sigmoid, tn.square, lambda t: tn.softmax(t, axis=1), tn.exp]
    a, b, c = (acts[i] for i in r.integers(len(acts), size=3))

    def loss():
        h = a(tn.scale(x @ W1, 0.5)) * mask
        return tn.sum_(c(tn.scale(b(h) @ W2, 0.5)))

    assert check_gradients(loss, [x, W1, W2], max_entries=None) < 1e-4


@pytest.mark.parametrize("seed", range(10))
def test_structural_ops_gradients(seed):
    r = np.random.default_rng(seed)
    x, y, b = param(r, 2, 3, 4), param(r, 2, 3, 4), param(r, 4)
    w = r.normal(size=(2, 6, 4))

    def loss():
        cat = tn.concat([x, y], axis=1)
        st_ = tn.stack([x[:, 0, :], y[:, 1, :]], axis=0)
        rows = tn.take_rows(x.reshape(6, 4), np.array([0, 0, 5]))
        return (tn.sum_(cat * w) + tn.sum_(tn.square(st_)) + tn.sum_(tn.tanh(rows))
                + tn.sum_(tn.add_bias(x.reshape(6, 4), b) * w.reshape(12, 4)[:6])
                + tn.sum_(tn.expand(tn.sum_(x, axis=2), 4, axis=2) * y)
                + tn.sum_(tn.transpose(x, (2, 0, 1)) * w.reshape(4, 2, 6)[:, :, :3]))

    assert check_gradients(loss, [x, y, b]) < 1e-4


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_debug_mode_flags_non_finite():
    tn.set_debug(True)
    with pytest.raises(NumericalError):
        tn.log(np.array([0.0]))


def test_float32_switch():
    tn.set_default_dtype("float32")
    assert tn.tensor([1.0, 2.0]).data.dtype == np.float32
