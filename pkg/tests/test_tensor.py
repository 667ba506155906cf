import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from neurovid import autodiff as ad
from neurovid.autodiff import ShapeError, Tensor, precision


def test_default_precision_is_float32():
    assert ad.get_precision() == "train32"
    assert Tensor([1.0]).dtype == np.float32


def test_check64_context_restores_mode():
    with precision("check64"):
        assert Tensor([1.0]).dtype == np.float64
    assert ad.get_precision() == "train32"
    with pytest.raises(ValueError):
        ad.set_precision("half")


def test_grad_of_sum_of_squares(f64):
    w = Tensor(np.array([1.0, -2.0, 3.5]), requires_grad=True)
    ad.tsum(ad.hadamard(w, w)).backward()
    np.testing.assert_array_equal(w.grad, 2 * w.data)


def test_backward_accumulates_until_reset(f64):
    w = Tensor(np.array([0.5, 1.5]), requires_grad=True)
    ad.tsum(w * w).backward()
    first = w.grad.copy()
    ad.tsum(w * w).backward()
    np.testing.assert_array_equal(w.grad, 2 * first)
    ad.zero_grad([w])
    assert w.grad is None


def test_backward_needs_scalar():
    w = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        (w * 2.0).backward()


def test_intermediate_grads_only_when_retained(f64):
    w = Tensor(np.array([2.0]), requires_grad=True)
    mid = w * 3.0
    kept = (w * 5.0).retain_grad()
    ad.tsum(mid * mid + kept).backward()
    assert mid.grad is None
    np.testing.assert_array_equal(kept.grad, [1.0])
    np.testing.assert_allclose(w.grad, [2 * 9 * 2.0 + 5.0])


def test_shared_subexpression_gets_both_paths(f64):
    x = Tensor(np.array([1.5]), requires_grad=True)
    y = x * x
    ad.tsum(y * y + y).backward()
    # d/dx (x^4 + x^2) = 4x^3 + 2x
    np.testing.assert_allclose(x.grad, [4 * 1.5 ** 3 + 2 * 1.5])


def test_no_grad_records_nothing():
    w = Tensor(np.ones(2), requires_grad=True)
    with ad.no_grad():
        y = w * 2.0
    assert y.is_leaf and not y.requires_grad


def test_frozen_blocks_parameter_grads(f64):
    w = Tensor(np.ones(2), requires_grad=True)
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    with ad.frozen([w]):
        loss = ad.tsum(w * x)
    loss.backward()
    assert w.grad is None
    np.testing.assert_array_equal(x.grad, [1.0, 1.0])
    assert w.requires_grad


def test_detach_cuts_graph(f64):
    w = Tensor(np.array([3.0]), requires_grad=True)
    d = (w * 2.0).detach()
    assert d.is_leaf and not d.requires_grad


@given(arrays(np.float64, st.integers(1, 6), elements=st.floats(-10, 10)))
def test_ops_are_pure(values):
    with precision("check64"):
        a = Tensor(values)
        first = ad.tanh(ad.sigmoid(a) * a).data
        second = ad.tanh(ad.sigmoid(a) * a).data
    assert first.tobytes() == second.tobytes()
