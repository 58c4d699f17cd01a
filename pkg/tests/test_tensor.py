import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dcdetector import tensor as T
from dcdetector.errors import ContractError, DimensionError, DomainError, NonFiniteError, ParameterError
from dcdetector.tensor import Tensor

from gradcheck import check

RNG = np.random.default_rng(1234)


def weighted(out, seed=0):
    """Scalar probe sum(out * R) with a fixed random R, so upstream grads are non-trivial."""
    r = np.random.default_rng(seed).normal(size=out.shape)
    return T.sum_axis(T.mul(out, Tensor(r)))


# -- matmul --------------------------------------------------------------

def test_matmul_identity():
    out = T.matmul(Tensor([[1, 0], [0, 1]]), Tensor([[3, 4], [5, 6]]))
    np.testing.assert_array_equal(out.data, [[3, 4], [5, 6]])


def test_matmul_hand_product():
    out = Tensor([[1, 2], [3, 4]]) @ Tensor([[5, 6], [7, 8]])
    np.testing.assert_array_equal(out.data, [[19, 22], [43, 50]])


def test_matmul_grad_of_sum_is_ones_times_bt():
    a = Tensor(RNG.normal(size=(2, 3)), requires_grad=True)
    b = Tensor(RNG.normal(size=(3, 2)), requires_grad=True)
    T.sum_axis(a @ b).backward()
    np.testing.assert_allclose(a.grad, np.ones((2, 2)) @ b.data.T)
    assert check(lambda x, y: T.sum_axis(T.matmul(x, y)), [a.data, b.data]) < 1e-4


def test_matmul_batched_broadcast_grad():
    a = RNG.normal(size=(3, 2, 4, 5))
    w = RNG.normal(size=(2, 5, 3))
    assert check(lambda x, y: weighted(T.matmul(x, y)), [a, w]) < 1e-4


def test_matmul_shape_mismatch():
    with pytest.raises(DimensionError):
        T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


# -- softmax -------------------------------------------------------------

def test_softmax_symmetric():
    np.testing.assert_allclose(T.softmax_last(Tensor([0.0, 0.0])).data, [0.5, 0.5])


def test_softmax_large_inputs_no_overflow():
    np.testing.assert_allclose(T.softmax_last(Tensor([1000.0, 1000.0, 1000.0])).data, [1 / 3] * 3)


def test_softmax_closed_form():
    np.testing.assert_allclose(T.softmax_last(Tensor([0.0, math.log(3)])).data, [0.25, 0.75])


def test_softmax_empty_axis():
    with pytest.raises(DimensionError):
        T.softmax_last(Tensor(np.zeros((2, 0))))


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 7)),
              elements=st.floats(-1e4, 1e4)))
def test_softmax_rows_stochastic(x):
    s = T.softmax_last(Tensor(x)).data
    assert np.all(s >= 0)
    np.testing.assert_allclose(s.sum(-1), 1.0, atol=1e-6)


# -- elementwise suite ---------------------------------------------------

@pytest.mark.parametrize("v", [-2.0, 0.0, 3.5])
def test_log_exp_inverse(v):
    assert T.log(T.exp(Tensor(v))).item() == pytest.approx(v, abs=1e-12)


def test_log_domain_error():
    with pytest.raises(DomainError):
        T.log(Tensor([1.0, 0.0]))


def test_layer_norm_constant_slice_is_zero():
    out = T.layer_norm_last(Tensor([2.0, 2.0, 2.0]), Tensor(np.ones(3)), Tensor(np.zeros(3)))
    np.testing.assert_array_equal(out.data, [0, 0, 0])


def test_layer_norm_moments():
    x = RNG.normal(3, 5, size=(4, 16))
    out = T.layer_norm_last(Tensor(x), Tensor(np.ones(16)), Tensor(np.zeros(16))).data
    np.testing.assert_allclose(out.mean(-1), 0, atol=1e-10)
    np.testing.assert_allclose(out.var(-1), 1, atol=1e-4)


def test_mean_axis_hand():
    np.testing.assert_array_equal(T.mean_axis(Tensor([[1, 3], [5, 7]]), 0).data, [3, 5])


def test_concat_and_transpose():
    a, b = Tensor(np.arange(6).reshape(2, 3)), Tensor(np.arange(3).reshape(1, 3))
    np.testing.assert_array_equal(T.concat_axis([a, b], 0).data, [[0, 1, 2], [3, 4, 5], [0, 1, 2]])
    np.testing.assert_array_equal(T.transpose_last2(a).data, np.arange(6).reshape(2, 3).T)


def test_broadcast_mismatch():
    with pytest.raises(DimensionError):
        T.add(Tensor(np.ones(3)), Tensor(np.ones(4)))


# -- repeat / tile ------------------------------------------------------

def test_repeat_interleave_definition():
    np.testing.assert_array_equal(T.repeat_interleave(Tensor([1, 2]), 0, 3).data, [1, 1, 1, 2, 2, 2])


def test_tile_definition():
    np.testing.assert_array_equal(T.tile(Tensor([1, 2]), 0, 3).data, [1, 2, 1, 2, 1, 2])


def test_repeat_interleave_grad_is_k():
    x = Tensor([0.3, -1.2, 2.0], requires_grad=True)
    T.sum_axis(T.repeat_interleave(x, 0, 4)).backward()
    np.testing.assert_array_equal(x.grad, [4, 4, 4])
    assert check(lambda t: T.sum_axis(T.repeat_interleave(t, 0, 4)), [x.data]) < 1e-4


@pytest.mark.parametrize("op", [T.repeat_interleave, T.tile])
def test_zero_factor_rejected(op):
    with pytest.raises(ParameterError):
        op(Tensor([1.0]), 0, 0)


# -- dropout -------------------------------------------------------------

def test_dropout_p0_identity():
    x = Tensor(RNG.normal(size=10))
    np.testing.assert_array_equal(T.dropout(x, 0.0, True, RNG).data, x.data)


def test_dropout_eval_identity():
    x = Tensor(RNG.normal(size=10))
    np.testing.assert_array_equal(T.dropout(x, 0.5, False).data, x.data)


def test_dropout_preserves_mean():
    out = T.dropout(Tensor(np.ones(100_000)), 0.5, True, np.random.default_rng(0)).data
    assert abs(out.mean() - 1.0) < 0.02
    assert set(np.unique(out)) <= {0.0, 2.0}


@pytest.mark.parametrize("p", [-0.1, 1.0, 1.5])
def test_dropout_bad_p(p):
    with pytest.raises(ParameterError):
        T.dropout(Tensor([1.0]), p, True, RNG)


# -- stop-gradient and backward -----------------------------------------

def test_stop_gradient_forward_identity():
    np.testing.assert_array_equal(T.stop_gradient(Tensor([1, 2, 3])).data, [1, 2, 3])


def test_stop_gradient_product():
    x = Tensor([1.0, -2.0, 3.0], requires_grad=True)
    T.sum_axis(T.mul(T.stop_gradient(x), x)).backward()
    np.testing.assert_array_equal(x.grad, x.data)

    # oracle: finite differences of sum(c * x) with the stopped copy frozen at c = x0
    c = x.data.copy()
    assert check(lambda t: T.sum_axis(T.mul(Tensor(c), t)), [x.data]) < 1e-4


def test_stop_gradient_alone_gives_no_grad():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = T.add(T.sum_axis(T.stop_gradient(x)), T.scale(T.sum_axis(x), 0.0))
    y.backward()
    np.testing.assert_array_equal(x.grad, [0, 0])


def test_backward_sum():
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    T.sum_axis(x).backward()
    np.testing.assert_array_equal(x.grad, [1, 1, 1])


def test_backward_square():
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    T.sum_axis(x * x).backward()
    np.testing.assert_array_equal(x.grad, [2, 4, 6])


def test_backward_shared_subexpression():
    x = Tensor([0.5, -1.0, 2.0], requires_grad=True)
    T.sum_axis(x * x + x).backward()
    np.testing.assert_allclose(x.grad, 2 * x.data + 1)


def test_backward_accumulates_until_zeroed():
    x = Tensor([1.0, 2.0], requires_grad=True)
    T.sum_axis(x).backward()
    T.sum_axis(x).backward()
    np.testing.assert_array_equal(x.grad, [2, 2])
    x.zero_grad()
    T.sum_axis(x).backward()
    np.testing.assert_array_equal(x.grad, [1, 1])


def test_backward_non_scalar_rejected():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ContractError):
        T.scale(x, 2.0).backward()


def test_non_finite_forward_is_an_error():
    with pytest.raises(NonFiniteError):
        T.exp(Tensor([1e6]))


def test_deterministic_ops():
    def run():
        rng = np.random.default_rng(5)
        x = Tensor(rng.normal(size=(4, 6)))
        return T.dropout(T.softmax_last(x @ Tensor(rng.normal(size=(6, 6)))), 0.3, True, rng).data
    np.testing.assert_array_equal(run(), run())


# -- finite-difference sweep over every differentiable op -------------------

def _rand(*shape):
    return RNG.normal(size=shape)


GRAD_CASES = {
    "add": (lambda a, b: weighted(T.add(a, b)), [_rand(3, 4), _rand(4)]),
    "sub": (lambda a, b: weighted(T.sub(a, b)), [_rand(2, 3, 4), _rand(3, 1)]),
    "mul": (lambda a, b: weighted(T.mul(a, b)), [_rand(3, 4), _rand(1, 4)]),
    "scale": (lambda a: weighted(T.scale(a, -2.5)), [_rand(2, 5)]),
    "div_scalar": (lambda a: weighted(T.div_scalar(a, 3.0)), [_rand(2, 5)]),
    "exp": (lambda a: weighted(T.exp(a)), [_rand(3, 3)]),
    "log": (lambda a: weighted(T.log(a)), [np.abs(_rand(3, 4)) + 0.5]),
    "maximum": (lambda a: weighted(T.maximum(a, 0.1)), [np.abs(_rand(3, 4)) + 0.3]),
    "sum_axis": (lambda a: weighted(T.sum_axis(a, 1)), [_rand(2, 3, 4)]),
    "sum_keepdims": (lambda a: weighted(T.sum_axis(a, -1, keepdims=True)), [_rand(2, 3, 4)]),
    "mean_axis": (lambda a: weighted(T.mean_axis(a, (0, 2))), [_rand(2, 3, 4)]),
    "reshape": (lambda a: weighted(T.reshape(a, (4, 6))), [_rand(2, 3, 4)]),
    "permute": (lambda a: weighted(T.permute(a, (2, 0, 1))), [_rand(2, 3, 4)]),
    "transpose_last2": (lambda a: weighted(T.transpose_last2(a)), [_rand(2, 3, 4)]),
    "concat": (lambda a, b: weighted(T.concat_axis([a, b], 1)), [_rand(2, 3), _rand(2, 2)]),
    "repeat_interleave": (lambda a: weighted(T.repeat_interleave(a, -1, 3)), [_rand(2, 3, 2)]),
    "tile": (lambda a: weighted(T.tile(a, 1, 2)), [_rand(2, 3, 2)]),
    "matmul": (lambda a, b: weighted(T.matmul(a, b)), [_rand(2, 3, 4), _rand(4, 2)]),
    "softmax": (lambda a: weighted(T.softmax_last(a)), [_rand(2, 3, 5)]),
    "layer_norm": (lambda a, g, b: weighted(T.layer_norm_last(a, g, b)),
                   [_rand(3, 6), _rand(6), _rand(6)]),
    "dropout_fixed_mask": (lambda a: weighted(T.dropout(a, 0.3, True, np.random.default_rng(9))),
                           [_rand(4, 5)]),
}


@pytest.mark.parametrize("name", sorted(GRAD_CASES))
def test_gradient_matches_finite_differences(name):
    build, arrays_ = GRAD_CASES[name]
    assert check(build, [a.copy() for a in arrays_]) < 1e-4
