"""Per-channel batch normalization over (B, T, H, W)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import ShapeError, Tensor, make_result

EPS = 1e-5
MOMENTUM = 0.9


@dataclass
class RunningStats:
    """Exponential moving averages kept for eval mode.

    ``mean <- momentum * mean + (1 - momentum) * batch_mean`` (same for var).
    """

    channels: int
    mean: np.ndarray = field(default=None)
    var: np.ndarray = field(default=None)
    updates: int = 0

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.channels, dtype=np.float64)
        if self.var is None:
            self.var = np.ones(self.channels, dtype=np.float64)


def batch_norm3d(
    x: Tensor,
    scale: Tensor,
    shift: Tensor,
    mode: str = "train",
    running_stats: RunningStats | None = None,
    update_stats: bool = True,
    momentum: float = MOMENTUM,
    eps: float = EPS,
) -> Tensor:
    """Normalize ``x`` [B, C, T, H, W] per channel, then scale and shift."""
    if x.ndim != 5:
        raise ShapeError(f"batch_norm3d expects [B, C, T, H, W], got {x.shape}")
    c = x.shape[1]
    if scale.shape != (c,) or shift.shape != (c,):
        raise ShapeError(f"batch_norm3d: scale/shift must be ({c},), got {scale.shape}/{shift.shape}")
    axes = (0, 2, 3, 4)
    bshape = (1, c, 1, 1, 1)
    count = x.size // c

    if mode == "train":
        if count < 2:
            raise ShapeError("batch_norm3d: train mode needs at least 2 values per channel")
        mu = x.data.mean(axis=axes, keepdims=True)
        centered = x.data - mu
        var = (centered * centered).mean(axis=axes, keepdims=True)
        if running_stats is not None and update_stats:
            unbiased = var.reshape(c) * (count / (count - 1))
            running_stats.mean = momentum * running_stats.mean + (1 - momentum) * mu.reshape(c)
            running_stats.var = momentum * running_stats.var + (1 - momentum) * unbiased
            running_stats.updates += 1
    elif mode == "eval":
        if running_stats is None or running_stats.updates == 0:
            raise RuntimeError("batch_norm3d: eval mode before any train-mode statistics")
        mu = running_stats.mean.reshape(bshape).astype(x.dtype)
        centered = x.data - mu
        var = running_stats.var.reshape(bshape).astype(x.dtype)
    else:
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    y = xhat * scale.data.reshape(bshape) + shift.data.reshape(bshape)

    need_x, need_scale, need_shift = x.requires_grad, scale.requires_grad, shift.requires_grad

    def backward(g):
        gscale = (g * xhat).sum(axis=axes) if need_scale else None
        gshift = g.sum(axis=axes) if need_shift else None
        gx = None
        if need_x:
            gxhat = g * scale.data.reshape(bshape)
            if mode == "train":
                gx = inv_std * (
                    gxhat
                    - gxhat.mean(axis=axes, keepdims=True)
                    - xhat * (gxhat * xhat).mean(axis=axes, keepdims=True)
                )
            else:
                gx = gxhat * inv_std
        return gx, gscale, gshift

    return make_result(y.astype(x.dtype, copy=False), (x, scale, shift), backward, "batch_norm3d")
