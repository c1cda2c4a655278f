import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from promptsched import autodiff as ad


def P(x):
    return ad.parameter(np.asarray(x, dtype=float))


# ---------------------------------------------------------------- forward examples

def test_matmul_identity():
    A = np.arange(9.0).reshape(3, 3) - 4
    out = ad.matmul(ad.constant(np.eye(3)), ad.constant(A))
    np.testing.assert_array_equal(out.values, A)


def test_matmul_hand_computed():
    out = ad.matmul(ad.constant([[1, 2], [3, 4]]), ad.constant([[5, 6], [7, 8]]))
    np.testing.assert_array_equal(out.values, [[19, 22], [43, 50]])


def test_add_zero_is_identity():
    v = np.random.default_rng(0).normal(size=(4, 3))
    np.testing.assert_array_equal(ad.add(ad.constant(v), ad.constant(np.zeros_like(v))).values, v)


def test_softmax_uniform_logits():
    for tau in (0.3, 1.0, 7.0):
        out = ad.softmax_temp(ad.constant([2.5] * 4), tau)
        np.testing.assert_allclose(out.values, [0.25] * 4, atol=1e-15)


def test_softmax_reference_values():
    # exp(1)/(exp(1)+exp(2)) evaluated directly
    e1, e2 = math.exp(1.0), math.exp(2.0)
    out = ad.softmax_temp(ad.constant([1.0, 2.0]), 1.0)
    np.testing.assert_allclose(out.values, [e1 / (e1 + e2), e2 / (e1 + e2)], atol=1e-15)
    np.testing.assert_allclose(out.values, [0.26894142, 0.73105858], atol=1e-8)


def test_sigmoid_reference_values():
    assert ad.sigmoid(ad.constant([0.0])).values[0] == 0.5
    np.testing.assert_allclose(ad.sigmoid(ad.constant([1.0])).values, [1 / (1 + math.exp(-1))], atol=1e-15)
    np.testing.assert_allclose(ad.sigmoid(ad.constant([1.0])).values, [0.73105858], atol=1e-8)


def test_sigmoid_extreme_inputs_stay_in_open_interval():
    out = ad.sigmoid(ad.constant([-700.0, -30.0, 30.0])).values
    assert (out > 0).all() and (out < 1).all()


@given(st.floats(-50, 50))
def test_sigmoid_antisymmetry(x):
    s = ad.sigmoid(ad.constant([x, -x])).values
    assert abs(s[0] + s[1] - 1.0) <= 1e-15


# ---------------------------------------------------------------- errors

def test_shape_mismatch_names_primitive_and_shapes():
    with pytest.raises(ad.ShapeError, match=r"matmul.*\(2, 3\).*\(2, 3\)"):
        ad.matmul(ad.constant(np.ones((2, 3))), ad.constant(np.ones((2, 3))))
    with pytest.raises(ad.ShapeError, match="add"):
        ad.add(ad.constant(np.ones((2, 3))), ad.constant(np.ones(2)))


def test_non_finite_input_rejected():
    with pytest.raises(ad.NonFiniteError):
        ad.sigmoid(ad.constant([np.nan]))
    with pytest.raises(ad.NonFiniteError):
        ad.add(ad.constant([1.0]), ad.constant([np.inf]))


def test_softmax_rejects_bad_tau_and_empty():
    with pytest.raises(ValueError, match="tau"):
        ad.softmax_temp(ad.constant([1.0, 2.0]), 0.0)
    with pytest.raises(ValueError, match="tau"):
        ad.softmax_temp(ad.constant([1.0, 2.0]), -1.0)
    with pytest.raises(ad.ShapeError):
        ad.softmax_temp(ad.Tensor(np.zeros((2, 0))), 1.0)


def test_backward_rejects_non_scalar():
    x = P([1.0, 2.0])
    with pytest.raises(ad.ShapeError, match="scalar"):
        ad.backward(ad.sigmoid(x))


def test_grad_check_epsilon_range_and_scalar_output():
    x = P([1.0])
    with pytest.raises(ValueError):
        ad.grad_check(lambda: ad.sum(x), [x], 1e-2)
    with pytest.raises(ValueError):
        ad.grad_check(lambda: ad.sum(x), [x], 1e-9)
    with pytest.raises(ad.ShapeError):
        ad.grad_check(lambda: ad.sigmoid(P([1.0, 2.0])), [x], 1e-5)


# ---------------------------------------------------------------- backward examples

def test_grad_of_sum_is_ones():
    v = P(np.random.default_rng(1).normal(size=(3, 4)))
    ad.backward(ad.sum(v))
    np.testing.assert_array_equal(v.grad, np.ones((3, 4)))


def test_sigmoid_grad_at_zero():
    x = P([0.0])
    ad.backward(ad.sum(ad.sigmoid(x)))
    assert x.grad[0] == 0.25


def test_cross_entropy_grad_is_softmax_minus_onehot():
    z = P([[1.0, 2.0]])
    ad.backward(ad.cross_entropy(z, [1]))
    e1, e2 = math.exp(1.0), math.exp(2.0)
    p = np.array([e1, e2]) / (e1 + e2)
    np.testing.assert_allclose(z.grad[0], p - [0, 1], atol=1e-15)
    np.testing.assert_allclose(z.grad[0], [0.26894142, -0.26894142], atol=1e-8)


def test_detached_leaf_keeps_no_grad_and_is_reported():
    a, b = P([1.0, 2.0]), P([3.0, 4.0])
    c = P([5.0])
    loss = ad.sum(ad.mul(a, b))
    ad.sum(ad.mul(loss, c))  # c joins the record but not this loss
    detached = ad.backward(loss, [a, b, c])
    assert a.grad is not None and b.grad is not None
    assert c.grad is None
    assert detached == [c]


def test_shared_leaf_gradients_accumulate():
    x = P([3.0])
    ad.backward(ad.sum(ad.mul(x, x)))
    assert x.grad[0] == 6.0


def test_combining_separate_records():
    x, y = P([1.0, 2.0]), P([0.5, -1.0])
    a = ad.sigmoid(x)
    b = ad.relu(y)
    loss = ad.sum(ad.add(a, b))
    ad.backward(loss)
    s = 1 / (1 + np.exp(-np.array([1.0, 2.0])))
    np.testing.assert_allclose(x.grad, s * (1 - s), atol=1e-15)
    np.testing.assert_array_equal(y.grad, [1.0, 0.0])


def test_backward_is_bitwise_deterministic():
    rng = np.random.default_rng(3)
    W, x = P(rng.normal(size=(5, 4))), P(rng.normal(size=(3, 5)))

    def run():
        h = ad.layer_norm(ad.matmul(x, W), ad.constant(np.ones(4)), ad.constant(np.zeros(4)))
        ad.backward(ad.cross_entropy(h, [0, 1, 3]))
        return W.grad.copy(), x.grad.copy()

    g1, g2 = run(), run()
    for a, b in zip(g1, g2):
        assert a.tobytes() == b.tobytes()


def test_record_is_topological_and_replays_bit_identically():
    rng = np.random.default_rng(4)
    W, b = P(rng.normal(size=(6, 3))), P(rng.normal(size=3))
    x = ad.constant(rng.normal(size=(2, 5, 6)))
    h = ad.relu(ad.add(ad.matmul(x, W), b))
    loss = ad.cross_entropy(ad.mean(h, axis=1), [0, 2])
    rec = loss.record
    for node in rec.nodes:
        assert all(i < node.output for i in node.inputs)
    assert rec.replay()


# ---------------------------------------------------------------- grad_check contract

def test_grad_check_exact_for_linear_map():
    c = np.random.default_rng(5).normal(size=6)
    x = P(np.random.default_rng(6).normal(size=6))
    err = ad.grad_check(lambda: ad.sum(ad.mul(x, ad.constant(c))), [x], 1e-5)
    assert err <= 1e-10


def test_grad_check_constant_function_is_zero():
    x = P([1.0, 2.0])
    k = ad.constant([3.0])
    assert ad.grad_check(lambda: ad.sum(k), [x], 1e-5) == 0.0


def away_from_zero(rng, shape):
    # positive entries in [0.5, 1.5]: sums of products cannot cancel to a tiny
    # gradient, which central differences at eps=1e-5 cannot resolve to 1e-6
    return rng.uniform(0.5, 1.5, size=shape)


# one builder per primitive: (seed) -> (loss function, leaves)
def _prim_cases():
    def mk(fn):
        return fn

    cases = {}

    @mk
    def add(rng):
        a, b = P(rng.normal(size=(3, 4))), P(rng.normal(size=4))
        w = ad.constant(rng.normal(size=(3, 4)))
        return (lambda: ad.sum(ad.mul(ad.add(a, b), w))), [a, b]

    @mk
    def sub(rng):
        a, b = P(rng.normal(size=(2, 3, 4))), P(rng.normal(size=(3, 4)))
        w = ad.constant(rng.normal(size=(2, 3, 4)))
        return (lambda: ad.sum(ad.mul(ad.sub(a, b), w))), [a, b]

    @mk
    def mul(rng):
        a, b = P(away_from_zero(rng, (3, 4))), P(away_from_zero(rng, (3, 4)))
        return (lambda: ad.sum(ad.mul(ad.mul(a, b), a))), [a, b]

    @mk
    def affine(rng):
        a = P(rng.normal(size=5))
        return (lambda: ad.sum(ad.mul(ad.affine(a, -1.7, 0.3), a))), [a]

    @mk
    def matmul(rng):
        a, b = P(away_from_zero(rng, (2, 3, 4))), P(away_from_zero(rng, (4, 5)))
        w = ad.constant(away_from_zero(rng, (2, 3, 5)))
        return (lambda: ad.sum(ad.mul(ad.matmul(a, b), w))), [a, b]

    @mk
    def matmul_batched(rng):
        a, b = P(away_from_zero(rng, (2, 3, 4))), P(away_from_zero(rng, (2, 4, 2)))
        w = ad.constant(away_from_zero(rng, (2, 3, 2)))
        return (lambda: ad.sum(ad.mul(ad.matmul(a, b), w))), [a, b]

    @mk
    def sum(rng):
        a = P(rng.normal(size=(3, 2)))
        return (lambda: ad.mul(ad.sum(a), ad.sum(a))), [a]

    @mk
    def mean(rng):
        a = P(rng.normal(size=(2, 5, 3)))
        w = ad.constant(rng.normal(size=(2, 3)))
        return (lambda: ad.sum(ad.mul(ad.mean(a, axis=1), w))), [a]

    @mk
    def softmax_temp(rng):
        a = P(rng.normal(size=(3, 4)))
        w = ad.constant(rng.normal(size=(3, 4)))
        tau = float(rng.uniform(0.5, 2.0))
        return (lambda: ad.sum(ad.mul(ad.softmax_temp(a, tau), w))), [a]

    @mk
    def sigmoid(rng):
        a = P(rng.normal(size=6) * 3)
        w = ad.constant(rng.normal(size=6))
        return (lambda: ad.sum(ad.mul(ad.sigmoid(a), w))), [a]

    @mk
    def relu(rng):
        # keep inputs away from the kink so central differences are valid
        x = rng.normal(size=8)
        x = np.where(np.abs(x) < 0.1, 0.5, x)
        a = P(x)
        w = ad.constant(rng.normal(size=8))
        return (lambda: ad.sum(ad.mul(ad.relu(a), w))), [a]

    @mk
    def concat(rng):
        a, b = P(rng.normal(size=(2, 3))), P(rng.normal(size=(2, 1)))
        w = ad.constant(rng.normal(size=(2, 4)))
        return (lambda: ad.sum(ad.mul(ad.concat([a, b], axis=1), w))), [a, b]

    @mk
    def expand(rng):
        a = P(rng.normal(size=(2, 3)))
        w = ad.constant(rng.normal(size=(4, 2, 3)))
        return (lambda: ad.sum(ad.mul(ad.expand(a, (4,)), w))), [a]

    @mk
    def reshape(rng):
        a = P(rng.normal(size=(2, 6)))
        w = ad.constant(rng.normal(size=(3, 4)))
        return (lambda: ad.sum(ad.mul(ad.reshape(a, (3, 4)), w))), [a]

    @mk
    def transpose(rng):
        a = P(rng.normal(size=(2, 3, 4)))
        w = ad.constant(rng.normal(size=(4, 2, 3)))
        return (lambda: ad.sum(ad.mul(ad.transpose(a, (2, 0, 1)), w))), [a]

    @mk
    def index(rng):
        a = P(rng.normal(size=(3, 4)))
        w = ad.constant(rng.normal(size=4))
        return (lambda: ad.sum(ad.mul(ad.index(a, 1), w))), [a]

    @mk
    def slice(rng):
        a = P(rng.normal(size=(2, 5, 3)))
        w = ad.constant(rng.normal(size=(2, 2, 3)))
        return (lambda: ad.sum(ad.mul(ad.slice_axis(a, 1, 1, 3), w))), [a]

    @mk
    def embedding(rng):
        a = P(rng.normal(size=(6, 3)))
        ids = rng.integers(0, 6, size=(2, 4))
        w = ad.constant(rng.normal(size=(2, 4, 3)))
        return (lambda: ad.sum(ad.mul(ad.embedding(a, ids), w))), [a]

    @mk
    def layer_norm(rng):
        x, g, b = P(rng.normal(size=(3, 5))), P(rng.normal(size=5)), P(rng.normal(size=5))
        w = ad.constant(rng.normal(size=(3, 5)))
        return (lambda: ad.sum(ad.mul(ad.layer_norm(x, g, b), w))), [x, g, b]

    @mk
    def cross_entropy(rng):
        z = P(rng.normal(size=(4, 3)))
        labels = rng.integers(0, 3, size=4)
        return (lambda: ad.cross_entropy(z, labels)), [z]

    for f in (add, sub, mul, affine, matmul, matmul_batched, sum, mean, softmax_temp, sigmoid, relu,
              concat, expand, reshape, transpose, index, slice, embedding, layer_norm, cross_entropy):
        cases[f.__name__] = f
    return cases


PRIM_CASES = _prim_cases()


def test_every_primitive_has_a_gradient_case():
    covered = {name.split("_batched")[0] for name in PRIM_CASES}
    assert set(ad.PRIMITIVES) <= covered


@pytest.mark.parametrize("name", sorted(PRIM_CASES))
def test_primitive_gradients_match_finite_differences(name):
    for seed in range(10):
        fn, leaves = PRIM_CASES[name](np.random.default_rng(seed))
        assert ad.grad_check(fn, leaves, 1e-5) <= 1e-6, f"{name} seed {seed}"
