"""Engine tests: gradients against central differences and hand algebra."""

import numpy as np
import pytest

from tinylm import autodiff as ad
from tinylm.autodiff import Tensor, backward, grad_check
from tinylm.errors import ShapeError

RNG_SEED = 1234


def rng():
    return np.random.default_rng(RNG_SEED)


# ---------------------------------------------------------------------------
# per-primitive gradient checks (well-conditioned O(1) inputs)


PRIMITIVE_CASES = [
    ("add_broadcast", (3, 4), lambda x: ad.sum_all(ad.mul(ad.add(x, np.ones(4)), x))),
    ("mul_broadcast", (3, 4), lambda x: ad.sum_all(ad.mul(x, np.arange(1.0, 5.0)))),
    ("matmul", (4, 3), lambda x: ad.sum_all(ad.mul(m := ad.matmul(x, np.full((3, 2), 0.5)), m))),
    ("matmul_batched", (2, 3, 4), lambda x: ad.sum_all(ad.matmul(x, np.full((4, 2), 0.3)))),
    ("sigmoid", (5,), lambda x: ad.sum_all(ad.mul(ad.sigmoid(x), np.arange(1.0, 6.0)))),
    ("tanh", (5,), lambda x: ad.sum_all(ad.mul(ad.tanh(x), np.arange(1.0, 6.0)))),
    ("gelu", (6,), lambda x: ad.sum_all(ad.mul(ad.gelu(x), np.arange(1.0, 7.0)))),
    ("softmax", (3, 5), lambda x: ad.sum_all(ad.mul(ad.softmax(x), np.arange(15.0).reshape(3, 5)))),
    ("log_softmax", (3, 5), lambda x: ad.sum_all(ad.mul(ad.log_softmax(x), np.arange(15.0).reshape(3, 5)))),
    ("layer_norm_x", (4, 6), lambda x: ad.sum_all(ad.mul(ad.layer_norm(x, np.full(6, 1.3), np.full(6, -0.2)), np.arange(24.0).reshape(4, 6)))),
    ("concat", (3, 4), lambda x: ad.sum_all(ad.mul(c := ad.concat([x, x], axis=1), c))),
    ("slice", (4, 6), lambda x: ad.sum_all(ad.mul(s := ad.slice_axis(x, 1, 1, 4), s))),
    ("reshape", (4, 6), lambda x: ad.sum_all(ad.mul(r := ad.reshape(x, (2, 12)), r))),
    ("transpose", (2, 3, 4), lambda x: ad.sum_all(ad.mul(t := ad.transpose(x, (2, 0, 1)), t))),
    ("sum_all", (7,), lambda x: ad.mul(ad.sum_all(x), 2.0)),
]


@pytest.mark.parametrize("name,shape,f", PRIMITIVE_CASES, ids=[c[0] for c in PRIMITIVE_CASES])
def test_primitive_gradients(name, shape, f):
    theta = rng().normal(0.0, 1.0, shape)
    assert grad_check(f, theta) < 1e-6


def test_cross_entropy_gradient():
    targets = np.array([[1, 3, -1], [0, 2, 4]])

    def f(x):
        return ad.cross_entropy(ad.reshape(x, (2, 3, 5)), targets)

    theta = rng().normal(0.0, 1.0, (2 * 3 * 5,))
    assert grad_check(f, theta) < 1e-6


def test_layer_norm_gain_bias_gradients():
    x = rng().normal(0.0, 1.0, (4, 6))
    weights = np.arange(24.0).reshape(4, 6)

    def f_gain(gain):
        return ad.sum_all(ad.mul(ad.layer_norm(Tensor(x), gain, np.zeros(6)), weights))

    def f_bias(bias):
        return ad.sum_all(ad.mul(ad.layer_norm(Tensor(x), np.ones(6), bias), weights))

    assert grad_check(f_gain, np.full(6, 0.8)) < 1e-6
    assert grad_check(f_bias, np.full(6, -0.3)) < 1e-6


def test_embedding_lookup_gradient_with_duplicate_ids():
    ids = np.array([[0, 2, 2], [1, 0, 2]])

    def f(table):
        return ad.sum_all(ad.mul(ad.embedding_lookup(table, ids),
                                 np.arange(18.0).reshape(2, 3, 3)))

    assert grad_check(f, rng().normal(0.0, 1.0, (4, 3))) < 1e-6


def test_dropout_gradient_with_fixed_mask():
    # same rng state on every call => same mask => differentiable function
    def f(x):
        return ad.sum_all(ad.mul(d := ad.dropout(x, 0.4, np.random.default_rng(7), True), d))

    assert grad_check(f, rng().normal(0.0, 1.0, (5, 5))) < 1e-6


# ---------------------------------------------------------------------------
# hand-computed values


def test_softmax_backward_matches_exact_jacobian():
    x = rng().normal(0.0, 1.0, 6)
    g = rng().normal(0.0, 1.0, 6)
    leaf = Tensor(x, requires_grad=True)
    out = ad.softmax(leaf)
    s = out.data.copy()
    backward(ad.sum_all(ad.mul(out, g)))
    jacobian = np.diag(s) - np.outer(s, s)  # d softmax_i / d x_j
    np.testing.assert_allclose(leaf.grad, jacobian @ g, rtol=0, atol=1e-14)


def test_cross_entropy_hand_value():
    # two positions, one ignored; mean NLL over the single valid target
    logits = np.log(np.array([[[0.2, 0.5, 0.3], [0.1, 0.1, 0.8]]]))
    targets = np.array([[1, -1]])
    loss = ad.cross_entropy(Tensor(logits), targets)
    assert loss.item() == pytest.approx(-np.log(0.5), abs=1e-12)


def test_cross_entropy_mean_over_valid_targets():
    logits = np.zeros((1, 4, 3))  # uniform => NLL = log 3 per position
    targets = np.array([[0, 2, -1, 1]])
    loss = ad.cross_entropy(Tensor(logits), targets)
    assert loss.item() == pytest.approx(np.log(3.0), abs=1e-12)


def test_cross_entropy_no_valid_targets_raises():
    with pytest.raises(ValueError):
        ad.cross_entropy(Tensor(np.zeros((1, 2, 3))), np.array([[-1, -1]]))


def test_cross_entropy_shape_mismatch_raises():
    with pytest.raises(ShapeError):
        ad.cross_entropy(Tensor(np.zeros((2, 3, 4))), np.zeros((3, 3), dtype=int))


def test_sigmoid_extreme_inputs_stable():
    out = ad.sigmoid(Tensor(np.array([-800.0, 0.0, 800.0])))
    np.testing.assert_allclose(out.data, [0.0, 0.5, 1.0], atol=1e-12)
    assert np.all(np.isfinite(out.data))


def test_softmax_rows_normalized_and_shift_invariant():
    x = rng().normal(0.0, 3.0, (4, 7))
    s = ad.softmax(Tensor(x)).data
    np.testing.assert_allclose(s.sum(axis=-1), 1.0, atol=1e-12)
    shifted = ad.softmax(Tensor(x + 123.0)).data
    np.testing.assert_allclose(s, shifted, atol=1e-12)


def test_log_softmax_agrees_with_log_of_softmax():
    x = rng().normal(0.0, 2.0, (3, 9))
    np.testing.assert_allclose(ad.log_softmax(Tensor(x)).data,
                               np.log(ad.softmax(Tensor(x)).data), atol=1e-12)
    np.testing.assert_allclose(ad.np_log_softmax(x),
                               ad.log_softmax(Tensor(x)).data, atol=1e-15)


def test_layer_norm_standardizes():
    x = rng().normal(3.0, 2.0, (5, 16))
    out = ad.layer_norm(Tensor(x), np.ones(16), np.zeros(16)).data
    np.testing.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-12)
    np.testing.assert_allclose(out.var(axis=-1), 1.0, atol=1e-4)  # eps bias


def test_layer_norm_shape_guard():
    with pytest.raises(ShapeError):
        ad.layer_norm(Tensor(np.zeros((2, 4))), np.ones(3), np.zeros(3))


def test_embedding_out_of_range_raises():
    with pytest.raises(ShapeError):
        ad.embedding_lookup(Tensor(np.zeros((4, 2))), np.array([[0, 4]]))
    with pytest.raises(ShapeError):
        ad.embedding_lookup(Tensor(np.zeros((4, 2))), np.array([[-1]]))


def test_matmul_shape_guards():
    with pytest.raises(ShapeError):
        ad.matmul(Tensor(np.zeros(3)), Tensor(np.zeros((3, 2))))
    with pytest.raises(ShapeError):
        ad.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))


def test_dropout_eval_is_identity_and_train_is_inverted():
    x = Tensor(np.ones((1000,)))
    assert ad.dropout(x, 0.5, None, train=False) is x
    out = ad.dropout(x, 0.25, np.random.default_rng(0), train=True).data
    kept = out > 0
    np.testing.assert_allclose(out[kept], 1.0 / 0.75, atol=1e-12)
    assert 0.70 < kept.mean() < 0.80
    with pytest.raises(ValueError):
        ad.dropout(x, 1.0, np.random.default_rng(0), train=True)


# ---------------------------------------------------------------------------
# tape mechanics


def test_gradient_accumulates_across_consumers():
    x = Tensor(np.array([2.0, -3.0]), requires_grad=True)
    y = ad.add(ad.mul(x, x), x)  # x^2 + x => dy/dx = 2x + 1
    backward(ad.sum_all(y))
    np.testing.assert_allclose(x.grad, [5.0, -5.0], atol=1e-12)


def test_backward_requires_scalar():
    x = Tensor(np.zeros(3), requires_grad=True)
    with pytest.raises(ShapeError):
        backward(ad.mul(x, 2.0))


def test_tape_released_after_backward():
    x = Tensor(np.array([1.5]), requires_grad=True)
    loss = ad.sum_all(ad.mul(x, x))
    backward(loss)
    first = x.grad.copy()
    assert loss._parents == () and loss._backward is None
    backward(loss)  # released tape: nothing propagates twice
    np.testing.assert_array_equal(x.grad, first)


def test_no_grad_tracking_without_requires_grad():
    x = Tensor(np.ones(3))
    out = ad.mul(x, 2.0)
    assert not out.requires_grad and out._backward is None


def test_constant_operands_are_lifted():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    backward(ad.sum_all(x + 1.0))
    np.testing.assert_allclose(x.grad, [1.0, 1.0])


def test_operator_sugar_matches_primitives():
    a = Tensor(np.array([[1.0, 2.0]]), requires_grad=True)
    b = Tensor(np.array([[3.0], [4.0]]), requires_grad=True)
    out = (a @ b) * 2.0 + (-1.0)
    assert out.data[0, 0] == pytest.approx(21.0)
    sub = Tensor(np.array([5.0])) - 2.0
    assert sub.data[0] == pytest.approx(3.0)


def test_unbroadcast_sums_to_parameter_shape():
    bias = Tensor(np.zeros((1, 4)), requires_grad=True)
    x = Tensor(rng().normal(size=(3, 4)))
    backward(ad.sum_all(ad.add(x, bias)))
    np.testing.assert_allclose(bias.grad, np.full((1, 4), 3.0))


def test_int_input_cast_to_default_float():
    assert Tensor(np.arange(3)).dtype == np.dtype(ad.default_dtype())


def test_default_dtype_switch_and_guard():
    # the default governs casts of non-float input; explicit float dtypes win
    try:
        ad.set_default_dtype(np.float32)
        assert ad.default_dtype() is np.float32
        assert Tensor(np.arange(3)).dtype == np.float32
        assert Tensor(np.array([1.0], dtype=np.float64)).dtype == np.float64
    finally:
        ad.set_default_dtype(np.float64)
    with pytest.raises(ValueError):
        ad.set_default_dtype(np.int32)


def test_grad_check_harness_detects_wrong_gradient():
    # a deliberately broken "primitive": forward x^2, backward says 3x
    def broken_square(x):
        out = ad._from_op(x.data ** 2, (x,),
                          lambda g: ad._accumulate(x, 3.0 * x.data * g))
        return ad.sum_all(out)

    assert grad_check(broken_square, np.array([1.0, 2.0])) > 0.1
