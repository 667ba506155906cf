"""Peephole ConvLSTM cell and the sequence fold built on it.

Gate equations, with ``*`` a same-padded 5x5 cross-correlation and ``o`` a
Hadamard product against full-resolution peephole maps::

    i  = sigmoid(W_xi * x + W_hi * H + W_ci o C  + b_i)
    f  = sigmoid(W_xf * x + W_hf * H + W_cf o C  + b_f)
    C' = f o C + i o tanh(W_xc * x + W_hc * H + b_c)
    o  = sigmoid(W_xo * x + W_ho * H + W_co o C' + b_o)
    H' = o o tanh(C')
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autodiff import ShapeError, Tensor, concat, conv2d
from .autodiff.tensor import make_result

KERNEL_SIZE = 5
GATES = ("i", "f", "c", "o")
PEEPHOLE_GATES = ("i", "f", "o")


def param_names() -> list[str]:
    names = [f"W_x{g}" for g in GATES] + [f"W_h{g}" for g in GATES]
    names += [f"W_c{g}" for g in PEEPHOLE_GATES]
    names += [f"b_{g}" for g in GATES]
    return names


@dataclass
class ConvLstmState:
    H: Tensor
    C: Tensor

    @classmethod
    def zeros(cls, batch: int, channels: int, height: int, width: int) -> "ConvLstmState":
        shape = (batch, channels, height, width)
        return cls(Tensor(np.zeros(shape)), Tensor(np.zeros(shape)))


@dataclass
class FusedKernels:
    """All four gate convolutions folded into one [4C, Cin + C, k, k] kernel."""

    kernel: Tensor
    bias: Tensor


class ConvLstmParams:
    """Weights of one ConvLSTM layer, keyed by the names in :func:`param_names`."""

    def __init__(self, in_channels: int, channels: int, height: int, width: int,
                 tensors: dict[str, Tensor], kernel_size: int = KERNEL_SIZE):
        self.in_channels = in_channels
        self.channels = channels
        self.height = height
        self.width = width
        self.kernel_size = kernel_size
        self.tensors = tensors
        expected = self.expected_shapes()
        for name, shape in expected.items():
            if name not in tensors:
                raise KeyError(f"missing ConvLSTM parameter {name}")
            if tensors[name].shape != shape:
                raise ShapeError(f"{name}: expected {shape}, got {tensors[name].shape}")

    def expected_shapes(self) -> dict[str, tuple]:
        k, c = self.kernel_size, self.channels
        shapes = {}
        for g in GATES:
            shapes[f"W_x{g}"] = (c, self.in_channels, k, k)
        for g in GATES:
            shapes[f"W_h{g}"] = (c, c, k, k)
        for g in PEEPHOLE_GATES:
            shapes[f"W_c{g}"] = (c, self.height, self.width)
        for g in GATES:
            shapes[f"b_{g}"] = (c,)
        return shapes

    @classmethod
    def initialize(cls, in_channels: int, channels: int, height: int, width: int,
                   rng: np.random.Generator, kernel_size: int = KERNEL_SIZE) -> "ConvLstmParams":
        """Kernels ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); peepholes and biases start at zero."""
        dummy = cls.__new__(cls)
        dummy.in_channels, dummy.channels = in_channels, channels
        dummy.height, dummy.width, dummy.kernel_size = height, width, kernel_size
        bound = 1.0 / np.sqrt((in_channels + channels) * kernel_size ** 2)
        tensors = {}
        for name, shape in dummy.expected_shapes().items():
            if name.startswith(("W_x", "W_h")):
                data = rng.uniform(-bound, bound, size=shape)
            else:
                data = np.zeros(shape)
            tensors[name] = Tensor(data, requires_grad=True, name=name)
        return cls(in_channels, channels, height, width, tensors, kernel_size)

    @classmethod
    def zeros(cls, in_channels: int, channels: int, height: int, width: int,
              kernel_size: int = KERNEL_SIZE) -> "ConvLstmParams":
        params = cls.initialize(in_channels, channels, height, width, np.random.default_rng(0), kernel_size)
        for t in params.tensors.values():
            t.data[...] = 0.0
        return params

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def parameters(self) -> list[Tensor]:
        return [self.tensors[n] for n in param_names()]

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        return [(prefix + n, self.tensors[n]) for n in param_names()]

    def count(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def fuse(self) -> FusedKernels:
        rows = [concat([self[f"W_x{g}"], self[f"W_h{g}"]], axis=1) for g in GATES]
        return FusedKernels(concat(rows, axis=0), concat([self[f"b_{g}"] for g in GATES], axis=0))


def count_layer_params(in_channels: int, channels: int, height: int, width: int,
                       kernel_size: int = KERNEL_SIZE) -> int:
    """``4*k*k*(Cin + C)*C + 4*C + 3*C*H*W`` for one peephole ConvLSTM layer."""
    if min(in_channels, channels, height, width, kernel_size) <= 0:
        raise ValueError("layer extents must be positive")
    return (4 * kernel_size ** 2 * (in_channels + channels) * channels
            + 4 * channels + 3 * channels * height * width)


def cell_step(params: ConvLstmParams, state: ConvLstmState, x: Tensor,
              fused: FusedKernels | None = None) -> ConvLstmState:
    """Advance one layer by one time step. Pass ``fused`` to reuse a kernel built by ``params.fuse()``."""
    c, h, w = params.channels, params.height, params.width
    if x.ndim != 4 or x.shape[1] != params.in_channels or x.shape[2:] != (h, w):
        raise ShapeError(f"input {x.shape} does not match layer [B, {params.in_channels}, {h}, {w}]")
    if state.H.shape != (x.shape[0], c, h, w) or state.C.shape != state.H.shape:
        raise ShapeError(f"state H{state.H.shape}/C{state.C.shape} does not match [{x.shape[0]}, {c}, {h}, {w}]")
    if fused is None:
        fused = params.fuse()

    z = conv2d(concat([x, state.H], axis=1), fused.kernel, fused.bias, padding="same")
    both = gate_update(z, state.C, params["W_ci"], params["W_cf"], params["W_co"])
    return ConvLstmState(both[0], both[1])


def _sigmoid(a: np.ndarray) -> np.ndarray:
    return 0.5 * (np.tanh(0.5 * a) + 1.0)


def gate_update(z: Tensor, cell: Tensor, w_ci: Tensor, w_cf: Tensor, w_co: Tensor) -> Tensor:
    """Gate nonlinearities and peephole terms as one graph node.

    ``z`` holds the four convolution pre-activations stacked on the channel
    axis in (i, f, c, o) order. Returns ``stack([H', C'])``.
    """
    c = cell.shape[1]
    if z.shape[1] != 4 * c:
        raise ShapeError(f"gate pre-activations need {4 * c} channels, got {z.shape[1]}")
    zi, zf, zc, zo = (z.data[:, k * c:(k + 1) * c] for k in range(4))
    prev = cell.data
    i = _sigmoid(zi + prev * w_ci.data)
    f = _sigmoid(zf + prev * w_cf.data)
    g = np.tanh(zc)
    new = f * prev + i * g
    o = _sigmoid(zo + new * w_co.data)
    tc = np.tanh(new)
    out = np.stack([o * tc, new])

    needs = [t.requires_grad for t in (z, cell, w_ci, w_cf, w_co)]

    def backward(grad):
        g_h, g_new = grad[0], grad[1]
        ao = g_h * tc * o * (1.0 - o)
        d_new = g_new + g_h * o * (1.0 - tc * tc) + ao * w_co.data
        ai = d_new * g * i * (1.0 - i)
        af = d_new * prev * f * (1.0 - f)
        ag = d_new * i * (1.0 - g * g)
        dz = np.concatenate([ai, af, ag, ao], axis=1) if needs[0] else None
        dprev = None
        if needs[1]:
            dprev = d_new * f + ai * w_ci.data + af * w_cf.data
        dci = (ai * prev).sum(axis=0) if needs[2] else None
        dcf = (af * prev).sum(axis=0) if needs[3] else None
        dco = (ao * new).sum(axis=0) if needs[4] else None
        return dz, dprev, dci, dcf, dco

    return make_result(out, (z, cell, w_ci, w_cf, w_co), backward, "convlstm_gates")


def run_layer(params: ConvLstmParams, initial_state: ConvLstmState,
              inputs: Sequence[Tensor]) -> tuple[list[Tensor], ConvLstmState]:
    """Fold :func:`cell_step` over ``inputs``; returns every hidden map and the final state."""
    if not len(inputs):
        raise ValueError("run_layer needs a nonempty input sequence")
    fused = params.fuse()
    state, hidden = initial_state, []
    for x in inputs:
        state = cell_step(params, state, x, fused)
        hidden.append(state.H)
    return hidden, state


def zero_state_like(params: ConvLstmParams, batch: int) -> ConvLstmState:
    return ConvLstmState.zeros(batch, params.channels, params.height, params.width)


__all__ = [
    "ConvLstmParams",
    "ConvLstmState",
    "FusedKernels",
    "KERNEL_SIZE",
    "cell_step",
    "count_layer_params",
    "param_names",
    "run_layer",
    "zero_state_like",
]
