"""Encoder / decoder / predictor generators built from two-layer ConvLSTM stacks.

Three architectures share the same pieces:

``benchmark``
    Two-layer stacks for encoder, decoder and predictor. Decoder and
    predictor outputs go through a 1x1 projection + tanh.
``multi_res_layers``
    Same stacks, but the upper layer only updates at even time indices and
    holds its state in between. Each of decoder and predictor owns two
    projections, picked by whether the upper layer updated on that step.
``multi_res_lstm``
    A half-rate benchmark model (scale 1) plus a full-rate model (scale 0)
    whose inputs carry a second channel with the interpolated scale-1 signal.

Time indices are 1-based in docstrings; lists are 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .autodiff import ShapeError, Tensor, concat, conv2d, tanh, unstack
from .convlstm import (
    ConvLstmParams,
    cell_step,
    count_layer_params,
    zero_state_like,
)
from .pyramid import downsample, upsample

KINDS = ("benchmark", "multi_res_lstm", "multi_res_layers")
KIND_ALIASES = {"mrlstm": "multi_res_lstm", "mrlayer": "multi_res_layers", "mrlayers": "multi_res_layers"}
ROLES = ("encoder", "decoder", "predictor")


def canonical_kind(kind: str) -> str:
    kind = KIND_ALIASES.get(kind, kind)
    if kind not in KINDS:
        raise ValueError(f"unknown generator kind {kind!r}; expected one of {KINDS}")
    return kind


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str = "benchmark"
    channels: tuple = (64, 64)
    height: int = 18
    width: int = 20
    in_channels: int = 1
    t: int = 16
    n: int = 16

    def __post_init__(self):
        object.__setattr__(self, "kind", canonical_kind(self.kind))
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if len(self.channels) != 2 or min(self.channels) < 1:
            raise ValueError(f"channels must be two positive widths, got {self.channels}")
        if min(self.height, self.width, self.in_channels, self.t, self.n) < 1:
            raise ValueError("extents, t and n must be positive")
        if self.kind == "multi_res_lstm" and (self.t % 2 or self.n % 2):
            raise ValueError(f"multi_res_lstm needs even t and n, got t={self.t}, n={self.n}")

    @property
    def hidden_width(self) -> int:
        return sum(self.channels)

    def as_dict(self) -> dict:
        return {"kind": self.kind, "channels": list(self.channels), "height": self.height,
                "width": self.width, "in_channels": self.in_channels, "t": self.t, "n": self.n}


# ----------------------------------------------------------------- counting
def _network_count(cin: int, channels: tuple, h: int, w: int) -> int:
    c1, c2 = channels
    return count_layer_params(cin, c1, h, w) + count_layer_params(c1, c2, h, w)


def _single_scale_count(cin: int, channels: tuple, h: int, w: int, projections: int, frame_channels: int) -> int:
    return 3 * _network_count(cin, channels, h, w) + projections * (sum(channels) + 1) * frame_channels


def count_params_by_scale(spec: GeneratorSpec) -> dict:
    """Closed-form parameter counts, split per scale for ``multi_res_lstm``."""
    h, w, ch, cin = spec.height, spec.width, spec.channels, spec.in_channels
    if spec.kind == "benchmark":
        return {"model": _single_scale_count(cin, ch, h, w, 2, cin)}
    if spec.kind == "multi_res_layers":
        return {"model": _single_scale_count(cin, ch, h, w, 4, cin)}
    return {
        "scale1": _single_scale_count(cin, ch, h, w, 2, cin),
        "scale0": _single_scale_count(2 * cin, ch, h, w, 2, cin),
    }


def count_params(spec: GeneratorSpec) -> int:
    return sum(count_params_by_scale(spec).values())


# --------------------------------------------------------------- components
@dataclass
class Projection:
    """1x1 convolution from the concatenated hidden maps to one frame, then tanh."""

    weight: Tensor
    bias: Tensor

    @classmethod
    def initialize(cls, width: int, out_channels: int, rng: np.random.Generator) -> "Projection":
        bound = 1.0 / np.sqrt(width)
        weight = Tensor(rng.uniform(-bound, bound, size=(out_channels, width, 1, 1)), requires_grad=True)
        return cls(weight, Tensor(np.zeros(out_channels), requires_grad=True))

    def named_parameters(self, prefix: str) -> list:
        return [(prefix + "weight", self.weight), (prefix + "bias", self.bias)]


def project_frame(hidden: Tensor, projection: Projection) -> Tensor:
    """Weighted average of all hidden maps per pixel, squashed by tanh."""
    if hidden.shape[1] != projection.weight.shape[1]:
        raise ShapeError(f"projection expects {projection.weight.shape[1]} channels, got {hidden.shape[1]}")
    return tanh(conv2d(hidden, projection.weight, projection.bias, padding=0))


@dataclass
class LstmStack:
    """Two ConvLSTM layers; layer 2 reads layer 1's hidden map."""

    layers: list

    @classmethod
    def initialize(cls, cin: int, channels: tuple, h: int, w: int, rng: np.random.Generator) -> "LstmStack":
        c1, c2 = channels
        return cls([ConvLstmParams.initialize(cin, c1, h, w, rng), ConvLstmParams.initialize(c1, c2, h, w, rng)])

    def named_parameters(self, prefix: str) -> list:
        out = []
        for k, layer in enumerate(self.layers, start=1):
            out += layer.named_parameters(f"{prefix}layer{k}.")
        return out

    def zero_states(self, batch: int) -> list:
        return [zero_state_like(layer, batch) for layer in self.layers]


Latent = list  # [ConvLstmState for layer 1, ConvLstmState for layer 2]


@dataclass
class Networks:
    """Encoder, decoder and predictor stacks plus output projections for one scale."""

    encoder: LstmStack
    decoder: LstmStack
    predictor: LstmStack
    projections: dict
    skip_upper: bool = False

    @classmethod
    def initialize(cls, cin: int, channels: tuple, h: int, w: int, rng: np.random.Generator,
                   skip_upper: bool = False, two_channel: bool = False) -> "Networks":
        stacks = {role: LstmStack.initialize(cin, channels, h, w, rng) for role in ROLES}
        names = ("decoder_a", "decoder_b", "predictor_a", "predictor_b") if skip_upper else ("decoder", "predictor")
        frame_channels = cin // 2 if two_channel else cin
        projections = {name: Projection.initialize(sum(channels), frame_channels, rng) for name in names}
        return cls(stacks["encoder"], stacks["decoder"], stacks["predictor"], projections, skip_upper)

    @property
    def in_channels(self) -> int:
        return self.encoder.layers[0].in_channels

    def named_parameters(self, prefix: str = "") -> list:
        out = []
        for role in ROLES:
            out += getattr(self, role).named_parameters(f"{prefix}{role}.")
        for name in sorted(self.projections):
            out += self.projections[name].named_parameters(f"{prefix}proj_{name}.")
        return out

    def projection(self, role: str, upper_updated: bool) -> Projection:
        if not self.skip_upper:
            return self.projections[role]
        return self.projections[f"{role}_a" if upper_updated else f"{role}_b"]


class _Runner:
    """Steps one stack, fusing its kernels once per pass and counting upper-layer updates."""

    def __init__(self, stack: LstmStack, skip_upper: bool, states: Latent):
        self.stack = stack
        self.skip_upper = skip_upper
        self.fused = [layer.fuse() for layer in stack.layers]
        self.states = list(states)
        self.upper_steps = 0

    def step(self, x: Tensor, index: int) -> bool:
        lower = cell_step(self.stack.layers[0], self.states[0], x, self.fused[0])
        update = not self.skip_upper or index % 2 == 0
        upper = self.states[1]
        if update:
            upper = cell_step(self.stack.layers[1], upper, lower.H, self.fused[1])
            self.upper_steps += 1
        self.states = [lower, upper]
        return update

    def hidden(self) -> Tensor:
        return concat([self.states[0].H, self.states[1].H], axis=1)


Extra = Optional[Callable[[int], Tensor]]


def _with_extra(frame: Tensor, extra: Extra, index: int) -> Tensor:
    return frame if extra is None else concat([frame, extra(index)], axis=1)


def _check_frames(frames: Sequence[Tensor], what: str) -> None:
    if not len(frames):
        raise ValueError(f"{what}: empty frame sequence")


def encode(networks: Networks, observations: Sequence[Tensor], extra: Extra = None,
           counter: Optional[dict] = None) -> Latent:
    """Run the encoder over ``x_1..x_t`` from zero state; returns both layers' final (H, C)."""
    _check_frames(observations, "encode")
    batch = observations[0].shape[0]
    runner = _Runner(networks.encoder, networks.skip_upper, networks.encoder.zero_states(batch))
    for i, x in enumerate(observations, start=1):
        runner.step(_with_extra(x, extra, i), i)
    if counter is not None:
        counter["encoder"] = runner.upper_steps
    return runner.states


def decode(networks: Networks, latent: Latent, t: int, extra: Extra = None,
           counter: Optional[dict] = None) -> list:
    """Reconstruct ``y_t, ..., y_1`` conditionally, starting from a zero frame.

    Returns the reconstructions in forward time order ``[y_1, ..., y_t]``.
    """
    if t < 1:
        raise ValueError("decode needs t >= 1")
    h = latent[0].H
    channels = networks.projection("decoder", True).weight.shape[0]
    frame = Tensor(np.zeros((h.shape[0], channels) + h.shape[2:], dtype=h.dtype))
    runner = _Runner(networks.decoder, networks.skip_upper, latent)
    outputs = []
    for index in range(t, 0, -1):
        updated = runner.step(_with_extra(frame, extra, index), index)
        frame = project_frame(runner.hidden(), networks.projection("decoder", updated))
        outputs.append(frame)
    if counter is not None:
        counter["decoder"] = runner.upper_steps
    return outputs[::-1]


def predict_benchmark(networks: Networks, latent: Latent, last_observation: Tensor, n: int,
                      t: int = 0, extra: Extra = None, counter: Optional[dict] = None) -> list:
    """Roll out ``y_{t+1}..y_{t+n}``: first step reads ``x_t``, later steps their own output."""
    if n < 1:
        raise ValueError("predict needs n >= 1")
    runner = _Runner(networks.predictor, networks.skip_upper, latent)
    frame, outputs = last_observation, []
    for index in range(t + 1, t + n + 1):
        updated = runner.step(_with_extra(frame, extra, index), index)
        frame = project_frame(runner.hidden(), networks.projection("predictor", updated))
        outputs.append(frame)
    if counter is not None:
        counter["predictor"] = runner.upper_steps
    return outputs


def predict_multi_res_layers(networks: Networks, observations: Sequence[Tensor], n: int,
                             counter: Optional[dict] = None) -> tuple[list, list]:
    """Encode, reconstruct and predict with the skip-step upper layer.

    Returns ``(reconstructions, predictions)``.
    """
    if not networks.skip_upper:
        raise ValueError("networks were not built with a skipping upper layer")
    t = len(observations)
    latent = encode(networks, observations, counter=counter)
    recon = decode(networks, latent, t, counter=counter)
    pred = predict_benchmark(networks, latent, observations[-1], n, t, counter=counter)
    return recon, pred


@dataclass
class CoarseOutput:
    observed: list        # true scale-1 frames at indices 2, 4, ..., t
    reconstructions: list
    predictions: list     # scale-1 frames at t+2, ..., t+n


def predict_multi_res_lstm(scale1: Networks, scale0: Networks, observations: Sequence[Tensor], n: int,
                           coarse_future: Optional[Sequence[Tensor]] = None
                           ) -> tuple[tuple[list, list], CoarseOutput]:
    """Two-scale rollout.

    Scale 1 runs the benchmark procedure on the half-rate sequence. Its
    predictions (or ``coarse_future`` when given) are interpolated to full
    rate and fed to scale 0 as a second input channel. Scale-1 predictions
    enter scale 0 as constants, so each scale learns from its own loss.

    Returns ``((recon0, pred0), CoarseOutput)``.
    """
    t = len(observations)
    if t % 2 or n % 2:
        raise ValueError(f"multi-resolution LSTM needs even t and n, got t={t}, n={n}")
    coarse_obs = downsample(observations)
    latent1 = encode(scale1, coarse_obs)
    recon1 = decode(scale1, latent1, t // 2)
    pred1 = predict_benchmark(scale1, latent1, coarse_obs[-1], n // 2)
    future = pred1 if coarse_future is None else list(coarse_future)
    if len(future) != n // 2:
        raise ValueError(f"coarse future needs {n // 2} frames, got {len(future)}")
    guide = upsample(list(coarse_obs) + [f.detach() for f in future])

    def extra(index: int) -> Tensor:
        return guide[index - 1]

    latent0 = encode(scale0, observations, extra=extra)
    recon0 = decode(scale0, latent0, t, extra=extra)
    pred0 = predict_benchmark(scale0, latent0, observations[-1], n, t, extra=extra)
    return (recon0, pred0), CoarseOutput(coarse_obs, recon1, pred1)


# -------------------------------------------------------------------- model
@dataclass
class GeneratorOutput:
    reconstructions: list
    predictions: list
    coarse: Optional[CoarseOutput] = None
    upper_steps: dict = field(default_factory=dict)


class GenerativeModel:
    """A generator of one of the three kinds, with deterministic seeded initialization."""

    def __init__(self, spec: GeneratorSpec, seed: int = 0):
        self.spec = spec
        rng = np.random.default_rng(seed)
        h, w, ch, cin = spec.height, spec.width, spec.channels, spec.in_channels
        if spec.kind == "multi_res_lstm":
            self.scales = {
                "scale1": Networks.initialize(cin, ch, h, w, rng),
                "scale0": Networks.initialize(2 * cin, ch, h, w, rng, two_channel=True),
            }
        else:
            skip = spec.kind == "multi_res_layers"
            self.scales = {"model": Networks.initialize(cin, ch, h, w, rng, skip_upper=skip)}

    def named_parameters(self) -> list:
        if len(self.scales) == 1:
            return self.scales["model"].named_parameters()
        out = []
        for name in ("scale1", "scale0"):
            out += self.scales[name].named_parameters(f"{name}.")
        return out

    def parameters(self) -> list:
        return [p for _, p in self.named_parameters()]

    def count(self) -> int:
        return sum(p.size for p in self.parameters())

    def forward(self, observations, n: Optional[int] = None,
                coarse_future: Optional[Sequence[Tensor]] = None) -> GeneratorOutput:
        """Reconstruct the observations and predict ``n`` future frames.

        ``observations`` is a list of [B, C, H, W] frames or a [B, C, t, H, W] array/Tensor.
        """
        frames = as_frames(observations)
        n = self.spec.n if n is None else n
        if self.spec.kind == "multi_res_lstm":
            (recon, pred), coarse = predict_multi_res_lstm(
                self.scales["scale1"], self.scales["scale0"], frames, n, coarse_future)
            return GeneratorOutput(recon, pred, coarse)
        networks = self.scales["model"]
        counter: dict = {}
        if self.spec.kind == "multi_res_layers":
            recon, pred = predict_multi_res_layers(networks, frames, n, counter)
        else:
            latent = encode(networks, frames, counter=counter)
            recon = decode(networks, latent, len(frames), counter=counter)
            pred = predict_benchmark(networks, latent, frames[-1], n, len(frames), counter=counter)
        return GeneratorOutput(recon, pred, upper_steps=counter)

    __call__ = forward


def as_frames(sequence) -> list:
    """[B, C, T, H, W] array/Tensor -> list of T constant [B, C, H, W] Tensors (lists pass through)."""
    if isinstance(sequence, (list, tuple)):
        return [f if isinstance(f, Tensor) else Tensor(f) for f in sequence]
    block = sequence if isinstance(sequence, Tensor) else Tensor(np.asarray(sequence))
    if block.ndim != 5:
        raise ShapeError(f"expected [B, C, T, H, W], got {block.shape}")
    if block.requires_grad:
        return unstack(block, axis=2)
    return [Tensor(np.ascontiguousarray(block.data[:, :, k]), dtype=block.dtype) for k in range(block.shape[2])]
