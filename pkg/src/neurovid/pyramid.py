"""Two-scale temporal pyramid: causal half-rate averaging and its interpolation.

Sequences are plain Python lists where list position ``k`` holds time index
``k + 1``. A scale-1 sequence holds only even indices, so its position ``k``
is time index ``2 * (k + 1)``. Elements can be Tensors or numpy arrays.
"""
from __future__ import annotations

from typing import Sequence


def downsample(frames: Sequence) -> list:
    """``x1[i] = (x0[i - 1] + x0[i]) / 2`` for every even ``i`` (1-based).

    Uses only the current and previous sample, so it adds no delay.
    """
    if len(frames) < 2:
        raise ValueError(f"downsample needs at least 2 frames, got {len(frames)}")
    return [(frames[i - 2] + frames[i - 1]) * 0.5 for i in range(2, len(frames) + 1, 2)]


def upsample(coarse: Sequence, length: int | None = None) -> list:
    """Fill odd indices by averaging the even neighbours.

    Even index ``i`` copies ``coarse`` at ``i``; odd ``i`` averages ``i - 1``
    and ``i + 1``. An odd index with only one neighbour (index 1, or index
    ``2K + 1`` when ``length`` asks for it) replicates that neighbour.
    """
    k = len(coarse)
    if k == 0:
        raise ValueError("upsample needs a nonempty sequence")
    length = 2 * k if length is None else length
    if not 1 <= length <= 2 * k + 1:
        raise ValueError(f"length must be in [1, {2 * k + 1}], got {length}")

    def at(even_index):
        return coarse[even_index // 2 - 1]

    out = []
    for i in range(1, length + 1):
        if i % 2 == 0:
            out.append(at(i))
        elif i == 1:
            out.append(at(2))
        elif i + 1 > 2 * k:
            out.append(at(i - 1))
        else:
            out.append((at(i - 1) + at(i + 1)) * 0.5)
    return out
