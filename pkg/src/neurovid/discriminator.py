"""Energy-based critic: a 3D-conv autoencoder over stacked past + future frames.

The energy of a sequence is its squared reconstruction error. The critic is
trained to give low energy to real sequences and high energy to sequences
whose future half was generated; the generator is trained to lower the
energy of its own rollouts.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .autodiff import (
    RunningStats,
    ShapeError,
    Tensor,
    batch_norm3d,
    conv3d,
    conv3d_transposed,
    conv_output_size,
    frozen,
    leaky_relu,
    mse,
    output_padding_for,
    stack,
    tanh,
)
from .autodiff.ops import DEFAULT_LEAKY_SLOPE, relu_hinge


@dataclass(frozen=True)
class CriticSpec:
    """Layer widths and geometry. ``decoder_channels`` excludes the output layer."""

    encoder_channels: tuple = (32, 32, 4)
    decoder_channels: tuple = (32, 32)
    in_channels: int = 1
    kernel: int = 7
    stride: int = 2
    padding: int = 3
    leaky_slope: float = DEFAULT_LEAKY_SLOPE
    batch_norm: bool = True
    final_activation: Optional[str] = "tanh"
    margin: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "encoder_channels", tuple(int(c) for c in self.encoder_channels))
        object.__setattr__(self, "decoder_channels", tuple(int(c) for c in self.decoder_channels))
        if not self.encoder_channels:
            raise ValueError("critic needs at least one encoder layer")
        if self.final_activation not in (None, "tanh"):
            raise ValueError(f"final_activation must be 'tanh' or None, got {self.final_activation!r}")

    @classmethod
    def full(cls, **kwargs) -> "CriticSpec":
        return cls(**kwargs)

    @classmethod
    def half_scale(cls, **kwargs) -> "CriticSpec":
        """Two conv + two deconv layers for the half-length coarse sequence."""
        return cls(encoder_channels=(32, 4), decoder_channels=(32,), **kwargs)

    @property
    def depth(self) -> int:
        return len(self.encoder_channels)

    def as_dict(self) -> dict:
        return {"encoder_channels": list(self.encoder_channels), "decoder_channels": list(self.decoder_channels),
                "in_channels": self.in_channels, "kernel": self.kernel, "stride": self.stride,
                "padding": self.padding, "leaky_slope": self.leaky_slope, "batch_norm": self.batch_norm,
                "final_activation": self.final_activation, "margin": self.margin}


@dataclass
class CriticForward:
    reconstruction: Tensor
    activations: list  # post-activation output of every layer, encoder first
    layer_names: list = field(default_factory=list)


class Critic:
    def __init__(self, spec: CriticSpec = CriticSpec(), seed: int = 0):
        self.spec = spec
        rng = np.random.default_rng(seed)
        k3 = spec.kernel ** 3
        self.params: dict[str, Tensor] = {}
        self.stats: dict[str, RunningStats] = {}
        widths = [spec.in_channels, *spec.encoder_channels]
        for i, (cin, cout) in enumerate(zip(widths[:-1], widths[1:]), start=1):
            self._add_layer(f"enc{i}", (cout, cin), cin * k3, rng, norm=spec.batch_norm)
        dec = [spec.encoder_channels[-1], *spec.decoder_channels, spec.in_channels]
        for i, (cin, cout) in enumerate(zip(dec[:-1], dec[1:]), start=1):
            last = i == len(dec) - 1
            # transposed kernels are stored [C_in, C_out, k, k, k]
            self._add_layer(f"dec{i}", (cin, cout), cin * k3, rng, norm=spec.batch_norm and not last, bias=last)

    def _add_layer(self, name, channels, fan_in, rng, norm, bias=False):
        bound = 1.0 / np.sqrt(fan_in)
        shape = channels + (self.spec.kernel,) * 3
        self.params[f"{name}.weight"] = Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)
        out_channels = channels[0] if name.startswith("enc") else channels[1]
        if bias or not norm:
            self.params[f"{name}.bias"] = Tensor(np.zeros(out_channels), requires_grad=True)
        if norm:
            self.params[f"{name}.bn_scale"] = Tensor(np.ones(out_channels), requires_grad=True)
            self.params[f"{name}.bn_shift"] = Tensor(np.zeros(out_channels), requires_grad=True)
            self.stats[name] = RunningStats(out_channels)

    @property
    def layer_names(self) -> list:
        enc = [f"enc{i}" for i in range(1, self.spec.depth + 1)]
        dec = [f"dec{i}" for i in range(1, len(self.spec.decoder_channels) + 2)]
        return enc + dec

    def parameters(self) -> list:
        return list(self.params.values())

    def named_parameters(self) -> list:
        return list(self.params.items())

    def minimum_extent(self) -> int:
        return self.spec.stride ** self.spec.depth

    def forward(self, z: Tensor, mode: str = "train", update_stats: bool = True) -> CriticForward:
        return critic_forward(self, z, mode, update_stats)

    __call__ = forward


def stack_sequence(past: Sequence[Tensor], future: Sequence[Tensor]) -> Tensor:
    """Concatenate frames along a new time axis -> [B, C, t + n, H, W].

    Past frames enter as constants; gradients reach only ``future``.
    """
    past = [p.detach() if isinstance(p, Tensor) else Tensor(p) for p in past]
    future = [f if isinstance(f, Tensor) else Tensor(f) for f in future]
    frames = past + future
    if not frames:
        raise ValueError("stack_sequence needs at least one frame")
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise ShapeError(f"frame extents differ: {sorted(shapes)}")
    return stack(frames, axis=2)


def critic_forward(critic: Critic, z: Tensor, mode: str = "train", update_stats: bool = True) -> CriticForward:
    """Encode with strided 3D convs, decode with transposed convs back to the input extent."""
    spec = critic.spec
    if z.ndim != 5 or z.shape[1] != spec.in_channels:
        raise ShapeError(f"critic expects [B, {spec.in_channels}, T, H, W], got {z.shape}")
    minimum = critic.minimum_extent()
    if min(z.shape[2:]) < minimum:
        raise ShapeError(f"sequence extents {z.shape[2:]} too small for a {spec.depth}-level "
                         f"stride-{spec.stride} pyramid (need >= {minimum})")
    p = critic.params
    k, s, pad = spec.kernel, spec.stride, spec.padding
    h, names, acts, extents = z, [], [], []

    def norm_act(x, name):
        if f"{name}.bn_scale" in p:
            x = batch_norm3d(x, p[f"{name}.bn_scale"], p[f"{name}.bn_shift"], mode, critic.stats[name], update_stats)
        return leaky_relu(x, spec.leaky_slope)

    for i in range(1, spec.depth + 1):
        extents.append(h.shape[2:])
        name = f"enc{i}"
        h = norm_act(conv3d(h, p[f"{name}.weight"], p.get(f"{name}.bias"), stride=s, padding=pad), name)
        names.append(name)
        acts.append(h)
    n_dec = len(spec.decoder_channels) + 1
    for i in range(1, n_dec + 1):
        name = f"dec{i}"
        target = extents[-i] if i <= len(extents) else None
        if target is None:
            raise ShapeError("decoder is deeper than encoder")
        out_pad = tuple(output_padding_for(n, k, s, pad) for n in target)
        h = conv3d_transposed(h, p[f"{name}.weight"], p.get(f"{name}.bias"), stride=s, padding=pad,
                              output_padding=out_pad)
        if i < n_dec:
            h = norm_act(h, name)
        elif spec.final_activation == "tanh":
            h = tanh(h)
        names.append(name)
        acts.append(h)
    if h.shape != z.shape:
        raise ShapeError(f"critic reconstruction {h.shape} != input {z.shape}")
    return CriticForward(h, acts, names)


def energy(critic: Critic, s: Tensor, mode: str = "train", update_stats: bool = True) -> Tensor:
    """Sum of squared reconstruction error of ``s``."""
    return mse(critic_forward(critic, s, mode, update_stats).reconstruction, s, reduction="sum")


def critic_loss(critic: Critic, x_true: Tensor, z_gen: Tensor, margin: Optional[float] = None) -> Tensor:
    """``energy(X) - energy(Z)``; with ``margin`` set, ``energy(X) + max(0, margin - energy(Z))``."""
    if x_true.shape != z_gen.shape:
        raise ShapeError(f"critic_loss: {x_true.shape} vs {z_gen.shape}")
    margin = critic.spec.margin if margin is None else margin
    real = energy(critic, x_true)
    fake = energy(critic, z_gen)
    if margin is None:
        return real - fake
    return real + relu_hinge(margin - fake)


def adversarial_loss_for_generator(critic: Critic, z_gen: Tensor) -> Tensor:
    """Energy of the generated sequence, with the critic's weights held constant."""
    with frozen(critic.parameters()):
        return energy(critic, z_gen, update_stats=False)


def extract_activation_map(forward: CriticForward | list, layer: int = -2, sample: int = 0,
                           time_length: Optional[int] = None) -> np.ndarray:
    """Channel-mean of one layer's activation for one sample -> [T', H', W'].

    ``layer=-2`` is the second-to-last layer (the last hidden decoder layer).
    With ``time_length`` the map is stretched in time by nearest neighbour.
    """
    acts = forward.activations if isinstance(forward, CriticForward) else forward
    if not -len(acts) <= layer < len(acts):
        raise IndexError(f"layer {layer} out of range for {len(acts)} layers")
    a = acts[layer]
    data = a.data if isinstance(a, Tensor) else np.asarray(a)
    fmap = data[sample].mean(axis=0)
    if time_length is not None:
        src = fmap.shape[0]
        index = np.minimum((np.arange(time_length) * src) // time_length, src - 1)
        fmap = fmap[index]
    return fmap


def activation_concentration(fmap: np.ndarray, past_length: int) -> tuple[float, float]:
    """Mean |activation| over the past part and the future part of a time-resampled map."""
    mags = np.abs(fmap)
    return float(mags[:past_length].mean()), float(mags[past_length:].mean())


__all__ = [
    "Critic",
    "CriticForward",
    "CriticSpec",
    "activation_concentration",
    "adversarial_loss_for_generator",
    "conv_output_size",
    "critic_forward",
    "critic_loss",
    "energy",
    "extract_activation_map",
    "stack_sequence",
]
