"""Synthetic traveling-wave recordings, normalization, windowing and the NVT1 tensor file."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

WAVE_KINDS = ("plane", "spiral", "pulse")
TENSOR_MAGIC = b"NVT1"
MAX_RANK = 8
DEFAULT_T = 16
DEFAULT_N = 16
TRAIN_FRACTION = 0.88


class TensorFileError(ValueError):
    """Malformed or unreadable tensor file."""


@dataclass(frozen=True)
class WaveParams:
    kind: str = "plane"
    height: int = 18
    width: int = 20
    speed: float = 0.5          # pixels per frame
    direction: float = 0.6      # radians
    wavelength: float = 8.0     # pixels
    amplitude: float = 1.0
    noise: float = 0.0
    seed: int = 0
    frame_rate: float = 277.78  # Hz, informational only

    def __post_init__(self):
        if self.kind not in WAVE_KINDS:
            raise ValueError(f"unknown wave kind {self.kind!r}; expected one of {WAVE_KINDS}")
        if self.speed <= 0:
            raise ValueError(f"speed must be positive, got {self.speed}")
        if self.wavelength <= 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        if not 0 <= self.amplitude <= 1:
            raise ValueError(f"amplitude must be in [0, 1], got {self.amplitude}")
        if self.noise < 0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")
        if self.height < 1 or self.width < 1:
            raise ValueError("grid extents must be positive")


def generate_waves(params: WaveParams, total_frames: int) -> np.ndarray:
    """Frames [T, H, W] in [-1, 1].

    plane:  ``A sin(2 pi (x cos a + y sin a - v tau) / lambda)``
    spiral: one-armed spiral, ``A sin(angle + 2 pi r / lambda - 2 pi v tau / lambda)``
    pulse:  Gaussian bump of width ``lambda / 4`` drifting at ``v`` on a torus
    """
    if total_frames < DEFAULT_T + DEFAULT_N:
        raise ValueError(f"need at least {DEFAULT_T + DEFAULT_N} frames, got {total_frames}")
    h, w = params.height, params.width
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    tau = np.arange(total_frames, dtype=np.float64)[:, None, None]
    a, v, lam, amp = params.direction, params.speed, params.wavelength, params.amplitude
    if params.kind == "plane":
        frames = amp * np.sin(2 * np.pi * (x * np.cos(a) + y * np.sin(a) - v * tau) / lam)
    elif params.kind == "spiral":
        dy, dx = y - (h - 1) / 2, x - (w - 1) / 2
        angle = np.arctan2(dy, dx)
        radius = np.hypot(dx, dy)
        frames = amp * np.sin(angle + 2 * np.pi * (radius - v * tau) / lam)
    else:
        cx = (w / 2 + v * np.cos(a) * tau) % w
        cy = (h / 2 + v * np.sin(a) * tau) % h
        ddx = np.abs(x - cx)
        ddy = np.abs(y - cy)
        ddx = np.minimum(ddx, w - ddx)
        ddy = np.minimum(ddy, h - ddy)
        width = lam / 4
        frames = amp * np.exp(-(ddx ** 2 + ddy ** 2) / (2 * width ** 2))
    if params.noise > 0:
        rng = np.random.default_rng(params.seed)
        frames = frames + rng.normal(0.0, params.noise, size=frames.shape)
    return np.clip(frames, -1.0, 1.0)


# ------------------------------------------------------------ normalization
@dataclass(frozen=True)
class Scale:
    """Affine map ``(x - center) / half_range`` onto [-1, 1]."""

    center: float
    half_range: float

    def apply(self, x):
        return (np.asarray(x, dtype=np.float64) - self.center) / self.half_range

    def invert(self, x):
        return np.asarray(x, dtype=np.float64) * self.half_range + self.center


def normalize(frames, mode: str = "minmax_symmetric") -> tuple[np.ndarray, Scale]:
    if mode != "minmax_symmetric":
        raise ValueError(f"unknown normalization mode {mode!r}")
    data = np.asarray(frames, dtype=np.float64)
    lo, hi = float(data.min()), float(data.max())
    if not hi > lo:
        raise ValueError("cannot min-max normalize constant data")
    scale = Scale((hi + lo) / 2, (hi - lo) / 2)
    return scale.apply(data), scale


def denormalize(frames, scale: Scale) -> np.ndarray:
    return scale.invert(frames)


# ---------------------------------------------------------------- windowing
@dataclass
class SequenceBatch:
    """[B, C, t + n, H, W] block; frames before ``t`` are observed."""

    data: np.ndarray
    t: int = DEFAULT_T

    def __post_init__(self):
        if self.data.ndim != 5:
            raise ValueError(f"SequenceBatch needs [B, C, T, H, W], got {self.data.shape}")
        if not 0 < self.t < self.data.shape[2]:
            raise ValueError(f"split point {self.t} outside time extent {self.data.shape[2]}")

    @property
    def n(self) -> int:
        return self.data.shape[2] - self.t

    @property
    def past(self) -> np.ndarray:
        return self.data[:, :, :self.t]

    @property
    def future(self) -> np.ndarray:
        return self.data[:, :, self.t:]


def window_count(length: int, stride: int, span: int = DEFAULT_T + DEFAULT_N) -> int:
    if length < span:
        return 0
    return (length - span) // stride + 1


def window(frames, t: int = DEFAULT_T, n: int = DEFAULT_N, stride: int = 1) -> np.ndarray:
    """All windows of ``t + n`` consecutive frames at ``stride`` -> [N, 1, t + n, H, W]."""
    frames = np.asarray(frames)
    if frames.ndim != 3:
        raise ValueError(f"expected frames [T, H, W], got {frames.shape}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    span = t + n
    if frames.shape[0] < span:
        raise ValueError(f"{frames.shape[0]} frames is shorter than one window of {span}")
    starts = range(0, frames.shape[0] - span + 1, stride)
    return np.stack([frames[s:s + span] for s in starts])[:, None]


def split_frames(frames, train_fraction: float = TRAIN_FRACTION) -> tuple[np.ndarray, np.ndarray]:
    """Contiguous train / test split by time."""
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    frames = np.asarray(frames)
    cut = int(round(frames.shape[0] * train_fraction))
    return frames[:cut], frames[cut:]


def sample_batch(windows: np.ndarray, batch_size: int, seed: int, iteration: int,
                 t: int = DEFAULT_T) -> SequenceBatch:
    """Batch for one training iteration, drawn from a generator keyed on (seed, iteration).

    Keying on the iteration makes any iteration reproducible on its own, so a
    resumed run sees the same batches as an uninterrupted one.
    """
    if len(windows) == 0:
        raise ValueError("no training windows")
    rng = np.random.default_rng([seed, iteration])
    index = rng.choice(len(windows), size=batch_size, replace=len(windows) < batch_size)
    return SequenceBatch(np.ascontiguousarray(windows[np.sort(index)]), t)


def iter_batches(windows: np.ndarray, batch_size: int, t: int = DEFAULT_T) -> Iterator[SequenceBatch]:
    """Consecutive, in-order batches (the last may be short)."""
    for start in range(0, len(windows), batch_size):
        yield SequenceBatch(windows[start:start + batch_size], t)


# ----------------------------------------------------------------- file I/O
def write_tensor_file(path, array) -> None:
    data = getattr(array, "data", array)
    data = np.asarray(data)
    if data.ndim > MAX_RANK:
        raise TensorFileError(f"rank {data.ndim} exceeds the maximum of {MAX_RANK}")
    header = TENSOR_MAGIC + struct.pack(f"<I{data.ndim}I", data.ndim, *data.shape)
    Path(path).write_bytes(header + np.ascontiguousarray(data, dtype="<f4").tobytes())


def read_tensor_file(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != TENSOR_MAGIC:
        raise TensorFileError(f"{path}: bad magic {raw[:4]!r}, expected {TENSOR_MAGIC!r}")
    if len(raw) < 8:
        raise TensorFileError(f"{path}: truncated header")
    (rank,) = struct.unpack_from("<I", raw, 4)
    if rank > MAX_RANK:
        raise TensorFileError(f"{path}: rank {rank} exceeds the maximum of {MAX_RANK}")
    offset = 8 + 4 * rank
    if len(raw) < offset:
        raise TensorFileError(f"{path}: truncated header")
    shape = struct.unpack_from(f"<{rank}I", raw, 8)
    expected = 4 * int(np.prod(shape, dtype=np.int64))
    payload = raw[offset:]
    if len(payload) != expected:
        raise TensorFileError(f"{path}: payload is {len(payload)} bytes, header implies {expected}")
    return np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float32)


def load_frames(path, expected_shape: Optional[tuple] = None) -> np.ndarray:
    """Read a [T, H, W] recording, rejecting empty or wrongly shaped files."""
    frames = read_tensor_file(path)
    if frames.ndim != 3 or frames.shape[0] == 0:
        raise TensorFileError(f"{path}: expected a nonempty [T, H, W] recording, got shape {frames.shape}")
    if expected_shape is not None and frames.shape[1:] != tuple(expected_shape):
        raise TensorFileError(f"{path}: frame extent {frames.shape[1:]} != model extent {tuple(expected_shape)}")
    return frames
