import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from neurovid import autodiff as ad
from neurovid.autodiff import ShapeError, Tensor

from oracles import sse_loop


def test_pointwise_fixed_points():
    assert ad.sigmoid(Tensor([0.0])).item() == 0.5
    assert ad.tanh(Tensor([0.0])).item() == 0.0
    assert ad.pointwise(Tensor([-1.0]), "leaky_relu", slope=0.2).item() == pytest.approx(-0.2)
    assert ad.leaky_relu(Tensor([-1.0])).item() == pytest.approx(-0.2)
    assert ad.leaky_relu(Tensor([3.0])).item() == 3.0
    with pytest.raises(ValueError):
        ad.pointwise(Tensor([0.0]), "gelu")


def test_sigmoid_saturates_without_overflow(f64):
    y = ad.sigmoid(Tensor([-1000.0, 1000.0])).data
    assert np.all(np.isfinite(y))
    np.testing.assert_allclose(y, [0.0, 1.0])


def test_hadamard_identities():
    a = Tensor(np.arange(6.0).reshape(2, 3))
    np.testing.assert_array_equal(ad.hadamard(a, Tensor(np.ones((2, 3)))).data, a.data)
    np.testing.assert_array_equal(ad.hadamard(a, Tensor(np.zeros((2, 3)))).data, 0)


def test_hadamard_broadcasts_over_batch_only():
    a = Tensor(np.ones((4, 2, 3, 3)))
    assert ad.hadamard(a, Tensor(np.ones((2, 3, 3)))).shape == (4, 2, 3, 3)
    with pytest.raises(ShapeError):
        ad.hadamard(a, Tensor(np.ones((3, 3))))


def test_hadamard_matches_loop(f64):
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(2, 3, 4)), rng.normal(size=(3, 4))
    out = ad.hadamard(Tensor(a), Tensor(b)).data
    for i in range(2):
        for j in range(3):
            for k in range(4):
                assert out[i, j, k] == a[i, j, k] * b[j, k]


def test_mse_examples(f64):
    a = Tensor(np.full(50, 0.3))
    assert ad.mse(a, a).item() == 0.0
    assert ad.mse(a, Tensor(np.full(50, 0.2))).item() == pytest.approx(0.01, rel=1e-12)
    with pytest.raises(ShapeError):
        ad.mse(a, Tensor(np.zeros(49)))
    with pytest.raises(ValueError):
        ad.mse(a, a, reduction="max")


@given(arrays(np.float64, (3, 4), elements=st.floats(-5, 5)),
       arrays(np.float64, (3, 4), elements=st.floats(-5, 5)))
def test_mse_sum_matches_loop(a, b):
    with ad.precision("check64"):
        got = ad.mse(Tensor(a), Tensor(b), reduction="sum").item()
    assert got == pytest.approx(sse_loop(a, b), rel=1e-12, abs=1e-12)


def test_broadcast_add_reduces_gradient(f64):
    a = Tensor(np.ones((3, 4)), requires_grad=True)
    b = Tensor(np.ones((1, 4)), requires_grad=True)
    ad.tsum(a + b).backward()
    np.testing.assert_array_equal(b.grad, np.full((1, 4), 3.0))


def test_shape_ops_round_trip(f64):
    x = Tensor(np.arange(24.0).reshape(2, 3, 4), requires_grad=True)
    parts = ad.unstack(x, axis=1)
    assert len(parts) == 3 and parts[0].shape == (2, 4)
    np.testing.assert_array_equal(ad.stack(parts, axis=1).data, x.data)
    joined = ad.concat([x[:, :1], x[:, 1:]], axis=1)
    np.testing.assert_array_equal(joined.data, x.data)
    ad.tsum(ad.reshape(joined, (6, 4)) * 2.0).backward()
    np.testing.assert_array_equal(x.grad, 2.0)


def test_mean_over_axes(f64):
    x = Tensor(np.arange(12.0).reshape(3, 4))
    np.testing.assert_allclose(ad.mean(x, axis=0).data, np.arange(12.0).reshape(3, 4).mean(axis=0))
    assert ad.mean(x).item() == pytest.approx(5.5)
    assert math.isclose(x.mean().item(), 5.5)
