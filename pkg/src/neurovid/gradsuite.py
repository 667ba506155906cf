"""Finite-difference checks for every differentiable op, the ConvLSTM step and the critic loss."""
from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from . import autodiff as ad
from .autodiff import RunningStats, Tensor, grad_check, precision
from .autodiff.ops import relu_hinge
from .convlstm import ConvLstmParams, ConvLstmState, cell_step, gate_update
from .discriminator import Critic, CriticSpec, critic_loss, stack_sequence


def _leaf(rng, *shape, low=-1.0, high=1.0):
    return Tensor(rng.uniform(low, high, size=shape), requires_grad=True)


def _away_from_zero(rng, *shape):
    # keeps kinks (leaky relu, hinge) out of the finite-difference stencil
    return Tensor(rng.uniform(0.2, 1.0, size=shape) * rng.choice([-1.0, 1.0], size=shape), requires_grad=True)


def _cases(rng: np.random.Generator) -> dict[str, tuple[Callable, dict]]:
    b = int(rng.integers(1, 3))
    a, c = _leaf(rng, b, 3, 4), _leaf(rng, b, 3, 4)
    pos = Tensor(rng.uniform(0.5, 2.0, size=(b, 3, 4)), requires_grad=True)
    row = _leaf(rng, 1, 3, 4)
    kinked = _away_from_zero(rng, b, 3, 4)
    x2, k2, b2 = _leaf(rng, b, 2, 5, 6), _leaf(rng, 3, 2, 3, 3), _leaf(rng, 3)
    x3, k3, b3 = _leaf(rng, b, 2, 5, 4, 6), _leaf(rng, 3, 2, 3, 3, 3), _leaf(rng, 3)
    y3 = _leaf(rng, b, 3, 3, 2, 3)
    bn_x, gamma, beta = _leaf(rng, b + 1, 2, 3, 2, 2), _leaf(rng, 2, low=0.5, high=1.5), _leaf(rng, 2)
    z = _leaf(rng, b, 8, 3, 3, low=-2, high=2)
    cell = _leaf(rng, b, 2, 3, 3)
    peep = [_leaf(rng, 2, 3, 3) for _ in range(3)]
    return {
        "add": (lambda: a + c, {"a": a, "b": c}),
        "sub": (lambda: a - row, {"a": a, "b": row}),
        "mul": (lambda: a * c, {"a": a, "b": c}),
        "div": (lambda: a / pos, {"a": a, "b": pos}),
        "neg": (lambda: -a, {"a": a}),
        "hadamard": (lambda: ad.hadamard(a, row), {"a": a, "b": row}),
        "square": (lambda: ad.square(a), {"a": a}),
        "sigmoid": (lambda: ad.sigmoid(a), {"a": a}),
        "tanh": (lambda: ad.tanh(a), {"a": a}),
        "leaky_relu": (lambda: ad.leaky_relu(kinked), {"a": kinked}),
        "relu_hinge": (lambda: relu_hinge(kinked), {"a": kinked}),
        "sum": (lambda: ad.tsum(a, axis=1), {"a": a}),
        "mean": (lambda: ad.mean(a, axis=(0, 2)), {"a": a}),
        "mse_mean": (lambda: ad.mse(a, c), {"a": a, "b": c}),
        "mse_sum": (lambda: ad.mse(a, c, reduction="sum"), {"a": a, "b": c}),
        "reshape": (lambda: ad.reshape(a, (b, 12)), {"a": a}),
        "getitem": (lambda: a[:, 1:, ::2], {"a": a}),
        "concat": (lambda: ad.concat([a, c], axis=1), {"a": a, "b": c}),
        "stack": (lambda: ad.stack([a, c], axis=2), {"a": a, "b": c}),
        "unstack": (lambda: ad.unstack(a, axis=1)[1] * ad.unstack(a, axis=1)[2], {"a": a}),
        "conv2d_same": (lambda: ad.conv2d(x2, k2, b2), {"x": x2, "kernel": k2, "bias": b2}),
        "conv2d_strided": (lambda: ad.conv2d(x2, k2, b2, padding=(1, 0), stride=(2, 1)),
                           {"x": x2, "kernel": k2, "bias": b2}),
        "conv3d": (lambda: ad.conv3d(x3, k3, b3, stride=1, padding=1), {"x": x3, "kernel": k3, "bias": b3}),
        "conv3d_strided": (lambda: ad.conv3d(x3, k3, b3, stride=2, padding=1), {"x": x3, "kernel": k3, "bias": b3}),
        "conv3d_transposed": (lambda: ad.conv3d_transposed(y3, k3, b3[:2], stride=2, padding=1, output_padding=(0, 1, 1)),
                              {"x": y3, "kernel": k3, "bias": b3}),
        "batch_norm3d": (lambda: ad.batch_norm3d(bn_x, gamma, beta, "train", RunningStats(2), update_stats=False),
                         {"x": bn_x, "scale": gamma, "shift": beta}),
        "convlstm_gates": (lambda: gate_update(z, cell, *peep),
                           {"z": z, "C": cell, "W_ci": peep[0], "W_cf": peep[1], "W_co": peep[2]}),
    }


def _convlstm_case(rng: np.random.Generator) -> tuple[Callable, dict]:
    b, cin, ch, h, w = int(rng.integers(1, 3)), int(rng.integers(1, 3)), 2, 4, 5
    params = ConvLstmParams.initialize(cin, ch, h, w, rng)
    for t in params.tensors.values():
        # nonzero peepholes and biases so every term is exercised
        t.data[...] = rng.uniform(-0.5, 0.5, size=t.shape)
    x = _leaf(rng, b, cin, h, w)
    state = ConvLstmState(_leaf(rng, b, ch, h, w), _leaf(rng, b, ch, h, w))

    def step():
        new = cell_step(params, state, x)
        return ad.concat([new.H, new.C], axis=1)

    return step, {"x": x, "H": state.H, "C": state.C, **params.tensors}


def _critic_case(rng: np.random.Generator) -> tuple[Callable, dict]:
    spec = CriticSpec(encoder_channels=(2, 2, 1), decoder_channels=(2, 2), kernel=3, padding=1)
    critic = Critic(spec, int(rng.integers(1 << 30)))
    for t in critic.parameters():
        t.data[...] = t.data + rng.uniform(-0.1, 0.1, size=t.shape)
    past = [Tensor(rng.uniform(-1, 1, size=(2, 1, 12, 12))) for _ in range(4)]
    future = [_leaf(rng, 2, 1, 12, 12) for _ in range(4)]
    truth = [Tensor(rng.uniform(-1, 1, size=(2, 1, 12, 12))) for _ in range(4)]

    def loss():
        return critic_loss(critic, stack_sequence(past, truth), stack_sequence(past, future))

    inputs = {f"future{i}": f for i, f in enumerate(future)}
    inputs.update(dict(critic.named_parameters()))
    return loss, inputs


def run_suite(seeds: Iterable[int] = range(20), critic_seeds: Iterable[int] = range(2),
              tolerance: float = ad.gradcheck.TOLERANCE) -> dict[str, float]:
    """Largest relative error per check, over all seeds, in 64-bit mode."""
    worst: dict[str, float] = {}

    def record(name, fn, inputs, seed):
        report = grad_check(fn, inputs, tolerance=tolerance, seed=seed)
        worst[name] = max(worst.get(name, 0.0), report.max_rel_error)

    with precision("check64"):
        for seed in seeds:
            rng = np.random.default_rng(seed)
            for name, (fn, inputs) in _cases(rng).items():
                record(name, fn, inputs, seed)
            fn, inputs = _convlstm_case(rng)
            record("convlstm_step", fn, inputs, seed)
        for seed in critic_seeds:
            fn, inputs = _critic_case(np.random.default_rng(1000 + seed))
            record("critic_loss", fn, inputs, seed)
    return worst
