"""Differentiable elementwise, reduction and shape operations."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import ShapeError, Tensor, as_tensor, make_result

DEFAULT_LEAKY_SLOPE = 0.2


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_result(a.data + b.data, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_result(a.data - b.data, (a, b), backward, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")

    need_a, need_b = a.requires_grad, b.requires_grad

    def backward(g):
        ga = _unbroadcast(g * b.data, a.shape) if need_a else None
        gb = _unbroadcast(g * a.data, b.shape) if need_b else None
        return ga, gb

    return make_result(a.data * b.data, (a, b), backward, "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "div")

    need_a, need_b = a.requires_grad, b.requires_grad

    def backward(g):
        ga = _unbroadcast(g / b.data, a.shape) if need_a else None
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape) if need_b else None
        return ga, gb

    return make_result(a.data / b.data, (a, b), backward, "div")


def neg(a: Tensor) -> Tensor:
    return make_result(-a.data, (a,), lambda g: (-g,), "neg")


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; ``b`` may omit (or have extent 1 on) the batch axis of ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    ok = a.shape == b.shape
    if not ok and b.ndim == a.ndim - 1:
        ok = b.shape == a.shape[1:]
    if not ok and b.ndim == a.ndim and b.shape[0] == 1:
        ok = b.shape[1:] == a.shape[1:]
    if not ok:
        raise ShapeError(f"hadamard: {b.shape} cannot be applied to {a.shape}")
    return mul(a, b)


def square(a: Tensor) -> Tensor:
    return make_result(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,), "square")


# ------------------------------------------------------------------ pointwise
def sigmoid(a: Tensor) -> Tensor:
    # tanh form avoids exp overflow for large |x|
    y = 0.5 * (np.tanh(0.5 * a.data) + 1.0)
    return make_result(y, (a,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return make_result(y, (a,), lambda g: (g * (1.0 - y * y),), "tanh")


def leaky_relu(a: Tensor, slope: float = DEFAULT_LEAKY_SLOPE) -> Tensor:
    pos = a.data > 0
    y = np.where(pos, a.data, slope * a.data)
    return make_result(y, (a,), lambda g: (np.where(pos, g, slope * g),), "leaky_relu")


def relu_hinge(a: Tensor) -> Tensor:
    """``max(0, a)``; used for the optional margin in the critic loss."""
    pos = a.data > 0
    return make_result(np.where(pos, a.data, 0.0), (a,), lambda g: (np.where(pos, g, 0.0),), "relu")


POINTWISE = {"sigmoid": sigmoid, "tanh": tanh, "leaky_relu": leaky_relu}


def pointwise(a: Tensor, fn: str, **kwargs) -> Tensor:
    try:
        f = POINTWISE[fn]
    except KeyError:
        raise ValueError(f"unknown pointwise function {fn!r}") from None
    return f(a, **kwargs)


# ----------------------------------------------------------------- reductions
def sum(a: Tensor, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy
    shape = a.shape

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return make_result(np.asarray(a.data.sum(axis=axis)), (a,), backward, "sum")


def mean(a: Tensor, axis=None) -> Tensor:
    count = a.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return mul(sum(a, axis), 1.0 / count)


def mse(a: Tensor, b: Tensor, reduction: str = "mean") -> Tensor:
    """Sum or mean of squared differences."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mse: shape mismatch {a.shape} vs {b.shape}")
    if reduction not in ("sum", "mean"):
        raise ValueError(f"reduction must be 'sum' or 'mean', got {reduction!r}")
    diff = a.data - b.data
    scale = 1.0 if reduction == "sum" else 1.0 / diff.size
    value = np.asarray((diff * diff).sum() * scale, dtype=diff.dtype)

    need_a, need_b = a.requires_grad, b.requires_grad

    def backward(g):
        ga = (2.0 * scale) * g * diff
        return (ga if need_a else None), (-ga if need_b else None)

    return make_result(value, (a, b), backward, "mse")


# ---------------------------------------------------------------------- shape
def reshape(a: Tensor, shape) -> Tensor:
    old = a.shape
    return make_result(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),), "reshape")


def getitem(a: Tensor, index) -> Tensor:
    shape, dtype = a.shape, a.dtype

    def backward(g):
        full = np.zeros(shape, dtype=dtype)
        full[index] = g
        return (full,)

    return make_result(a.data[index], (a,), backward, "getitem")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {exc}") from None
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return np.split(g, bounds, axis=axis)

    return make_result(data, tensors, backward, "concat")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if len({t.shape for t in tensors}) != 1:
        raise ShapeError(f"stack: unequal shapes {[t.shape for t in tensors]}")
    data = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        return [np.take(g, i, axis=axis) for i in range(len(tensors))]

    return make_result(data, tensors, backward, "stack")


def unstack(a: Tensor, axis: int = 0) -> list:
    index = [slice(None)] * a.ndim
    out = []
    for i in range(a.shape[axis]):
        index[axis] = i
        out.append(getitem(a, tuple(index)))
    return out
