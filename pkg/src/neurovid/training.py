"""Loss assembly, Adam, clipping, the alternating generator/critic loop."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .autodiff import NumericalError, ShapeError, Tensor, mse, zero_grad
from .data import Scale, SequenceBatch
from .discriminator import Critic, CriticSpec, adversarial_loss_for_generator, critic_loss, stack_sequence
from .generative import GenerativeModel, GeneratorOutput, as_frames
from .pyramid import downsample

METRICS_HEADER = ("iteration", "lr", "l_rec", "l_pred", "l_adv", "l_d")
COMPONENTS = ("l_rec", "l_pred", "l_adv")


@dataclass
class TrainConfig:
    lambda_rec: float = 1.0
    lambda_pred: float = 1.0
    lambda_adv: float = 0.1
    learning_rate: float = 1e-3
    total_iterations: int = 2000
    clip_norm: float = 1e-3
    critic_update_period: int = 2
    adversarial: bool = False
    batch_size: int = 4
    seed: int = 0
    margin: Optional[float] = None

    def __post_init__(self):
        if min(self.lambda_rec, self.lambda_pred, self.lambda_adv) < 0:
            raise ValueError("loss weights must be >= 0")
        if self.clip_norm <= 0:
            raise ValueError(f"clip_norm must be positive, got {self.clip_norm}")
        if self.critic_update_period < 1:
            raise ValueError(f"critic_update_period must be >= 1, got {self.critic_update_period}")
        if self.learning_rate <= 0 or self.total_iterations < 1 or self.batch_size < 1:
            raise ValueError("learning_rate, total_iterations and batch_size must be positive")

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Mapping) -> "TrainConfig":
        known = {f.name: f.type for f in fields(cls)}
        out = {}
        for key, value in values.items():
            if key not in known:
                raise KeyError(f"unknown training option {key!r}")
            out[key] = value
        return cls(**out)


# ------------------------------------------------------------------- losses
def sequence_sse(outputs: Sequence[Tensor], targets: Sequence[Tensor]) -> Tensor:
    """``sum_i ||x_i - y_i||^2`` over paired frame lists."""
    if len(outputs) != len(targets) or not outputs:
        raise ShapeError(f"{len(outputs)} outputs vs {len(targets)} targets")
    total = None
    for y, x in zip(outputs, targets):
        if y.shape != x.shape:
            raise ShapeError(f"output {y.shape} vs target {x.shape}")
        term = mse(y, x, reduction="sum")
        total = term if total is None else total + term
    return total


def generator_loss(outputs, targets, critic: Optional[Critic], config: TrainConfig) -> tuple[Tensor, dict]:
    """``lambda_rec L_rec + lambda_pred L_pred (+ lambda_adv L_adv)``.

    ``outputs`` is ``(reconstructions, predictions)``, ``targets`` is
    ``(past, future)``; all are frame lists. The adversarial term is the
    critic energy of true past stacked with predicted future and is only
    present when ``config.adversarial`` is on.
    """
    recon, pred = outputs
    past, future = targets
    l_rec = sequence_sse(recon, past)
    l_pred = sequence_sse(pred, future)
    total = l_rec * config.lambda_rec + l_pred * config.lambda_pred
    parts = {"l_rec": l_rec, "l_pred": l_pred}
    if config.adversarial:
        if critic is None:
            raise ValueError("adversarial training needs a critic")
        l_adv = adversarial_loss_for_generator(critic, stack_sequence(past, pred))
        total = total + l_adv * config.lambda_adv
        parts["l_adv"] = l_adv
    return total, parts


def multi_scale_loss(scales: Mapping[int, tuple], config: TrainConfig) -> tuple[Tensor, dict]:
    """Sum over scales k = 0, 1 of :func:`generator_loss` with shared weights.

    ``scales[k] = (outputs, targets, critic)``. Components are summed over
    scales and also reported per scale as ``"<component>@<k>"``.
    """
    missing = {0, 1} - set(scales)
    if missing:
        raise ValueError(f"multi_scale_loss needs scales 0 and 1; missing {sorted(missing)}")
    total, parts = None, {}
    for k in sorted(scales):
        outputs, targets, critic = scales[k]
        loss_k, parts_k = generator_loss(outputs, targets, critic, config)
        total = loss_k if total is None else total + loss_k
        for name, value in parts_k.items():
            parts[f"{name}@{k}"] = value
            parts[name] = value if name not in parts else parts[name] + value
    return total, parts


def model_loss(model: GenerativeModel, output: GeneratorOutput, past: list, future: list,
               critics: Mapping[str, Critic], config: TrainConfig) -> tuple[Tensor, dict]:
    """Single-scale loss for one-network models, two-scale loss for the multi-resolution LSTM."""
    if model.spec.kind != "multi_res_lstm":
        return generator_loss((output.reconstructions, output.predictions), (past, future),
                              critics.get("model"), config)
    coarse = output.coarse
    return multi_scale_loss({
        0: ((output.reconstructions, output.predictions), (past, future), critics.get("scale0")),
        1: ((coarse.reconstructions, coarse.predictions), (downsample(past), downsample(future)),
            critics.get("scale1")),
    }, config)


def default_critics(model: GenerativeModel, seed: int = 0) -> dict:
    """One full critic per output scale; the coarse scale gets the two-layer variant."""
    cin = model.spec.in_channels
    if model.spec.kind == "multi_res_lstm":
        return {"scale0": Critic(CriticSpec(in_channels=cin), seed + 1),
                "scale1": Critic(CriticSpec.half_scale(in_channels=cin), seed + 2)}
    return {"model": Critic(CriticSpec(in_channels=cin), seed + 1)}


# ---------------------------------------------------------------- optimizer
@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[Tensor], **kwargs) -> "AdamState":
        return cls([np.zeros_like(p.data) for p in params], [np.zeros_like(p.data) for p in params], **kwargs)


def adam_step(state: AdamState, params: Sequence[Tensor], grads: Sequence, lr: float) -> None:
    """Bias-corrected Adam update, in place."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ValueError("params, grads and optimizer state differ in length")
    if any(g is None for g in grads):
        raise ValueError("adam_step: some parameters have no gradient")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.data.dtype, copy=False)


def clip_gradients(params: Sequence[Tensor], max_norm: float = 1e-3) -> float:
    """Rescale all gradients so their joint l2 norm is at most ``max_norm``; returns the factor."""
    grads = [p.grad for p in params if p.grad is not None]
    norm = math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads))
    if norm <= max_norm:
        return 1.0
    factor = max_norm / norm
    for p in params:
        if p.grad is not None:
            p.grad *= p.grad.dtype.type(factor)
    return factor


def lr_schedule(iteration: int, total: int, base: float = 1e-3) -> float:
    """``base`` for the first half of training, ``base / 10`` after."""
    if not 0 <= iteration < total:
        raise ValueError(f"iteration {iteration} outside [0, {total})")
    return base if iteration < total / 2 else base / 10


# --------------------------------------------------------------------- loop
def _frames(block: np.ndarray) -> list:
    return as_frames(np.ascontiguousarray(block))


class Trainer:
    """Holds a generator, optional critics, their optimizers and the iteration counter."""

    def __init__(self, model: GenerativeModel, config: TrainConfig,
                 critics: Optional[dict] = None, scale: Optional[Scale] = None):
        self.model = model
        self.config = config
        if config.adversarial and critics is None:
            critics = default_critics(model, config.seed)
        self.critics = critics if config.adversarial else {}
        self.scale = scale
        self.gen_params = model.parameters()
        self.gen_opt = AdamState.for_params(self.gen_params)
        self.critic_opts = {k: AdamState.for_params(c.parameters()) for k, c in self.critics.items()}
        self.iteration = 0
        self.critic_updates = 0

    @property
    def generator_updates(self) -> int:
        return self.gen_opt.step

    def _check(self, parts: dict, extra: Optional[dict] = None) -> None:
        for name, value in {**parts, **(extra or {})}.items():
            v = value.item() if isinstance(value, Tensor) else value
            if not math.isfinite(v):
                raise NumericalError(f"iteration {self.iteration}: non-finite {name} ({v})")

    def step(self, batch: SequenceBatch) -> dict:
        cfg = self.config
        lr = lr_schedule(self.iteration, cfg.total_iterations, cfg.learning_rate)
        past, future = _frames(batch.past), _frames(batch.future)

        zero_grad(self.gen_params)
        output = self.model(past, n=len(future))
        loss, parts = model_loss(self.model, output, past, future, self.critics, cfg)
        self._check(parts, {"loss": loss})
        loss.backward()
        clip_gradients(self.gen_params, cfg.clip_norm)
        adam_step(self.gen_opt, self.gen_params, [p.grad for p in self.gen_params], lr)

        row = {"iteration": self.iteration, "lr": lr}
        for name in COMPONENTS:
            row[name] = parts[name].item() if name in parts else None
        row["l_d"] = None
        if cfg.adversarial and (self.iteration + 1) % cfg.critic_update_period == 0:
            row["l_d"] = self._critic_step(past, future, output, lr)
        self.iteration += 1
        return row

    def _critic_step(self, past: list, future: list, output: GeneratorOutput, lr: float) -> float:
        # the critic sees this iteration's generator outputs as constants
        pairs = {"model": (past, future, output.predictions), "scale0": (past, future, output.predictions)}
        if output.coarse is not None:
            pairs["scale1"] = (downsample(past), downsample(future), output.coarse.predictions)
        total = 0.0
        for key, critic in self.critics.items():
            p, f, pred = pairs[key]
            params = critic.parameters()
            zero_grad(params)
            real = stack_sequence(p, f)
            fake = stack_sequence(p, [y.detach() for y in pred])
            l_d = critic_loss(critic, real, fake, self.config.margin)
            self._check({f"l_d[{key}]": l_d})
            l_d.backward()
            adam_step(self.critic_opts[key], params, [q.grad for q in params], lr)
            total += l_d.item()
        self.critic_updates += 1
        return total

    def run(self, batches: Callable[[int], SequenceBatch], iterations: Optional[int] = None,
            metrics_path=None, progress: Optional[Callable[[dict], None]] = None) -> list:
        """Train until ``iterations`` total steps (default: ``config.total_iterations``)."""
        stop = self.config.total_iterations if iterations is None else iterations
        rows = []
        while self.iteration < stop:
            row = self.step(batches(self.iteration))
            rows.append(row)
            if progress is not None:
                progress(row)
        if metrics_path is not None:
            write_metrics(metrics_path, rows)
        return rows


def format_metrics(rows: Sequence[dict]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for row in rows:
        writer.writerow(["" if row[k] is None else repr(row[k]) if isinstance(row[k], float) else row[k]
                         for k in METRICS_HEADER])
    return buffer.getvalue()


def write_metrics(path, rows: Sequence[dict]) -> None:
    Path(path).write_text(format_metrics(rows))
