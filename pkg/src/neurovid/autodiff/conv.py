"""Cross-correlation in 2 and 3 spatial dimensions, plus the 3D transpose.

All three share one im2col core and its tap-wise adjoint. No kernel flip: ``conv(x, k)[o] =
sum_c sum_d x[c, o*s + d] * k[o_ch, c, d]`` over the zero-padded input.
"""
from __future__ import annotations

import itertools

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .tensor import ShapeError, Tensor, make_result


def conv_output_size(n: int, k: int, s: int = 1, p: int = 0) -> int:
    """Extent of a strided, padded cross-correlation: ``floor((n + 2p - k) / s) + 1``."""
    return (n + 2 * p - k) // s + 1


def transposed_output_size(m: int, k: int, s: int = 1, p: int = 0, output_padding: int = 0) -> int:
    return (m - 1) * s - 2 * p + k + output_padding


def output_padding_for(n: int, k: int, s: int, p: int) -> int:
    """Output padding that lets the transpose restore extent ``n`` after a forward conv."""
    m = conv_output_size(n, k, s, p)
    return n - transposed_output_size(m, k, s, p)


def _per_axis(value, ndim: int, what: str) -> tuple:
    if np.isscalar(value):
        return (int(value),) * ndim
    value = tuple(int(v) for v in value)
    if len(value) != ndim:
        raise ValueError(f"{what} needs {ndim} entries, got {value}")
    return value


def _to_last(x: np.ndarray, padding: tuple) -> np.ndarray:
    """Channel-first array -> zero-padded channel-last copy."""
    padded = (x.shape[0],) + tuple(n + 2 * p for n, p in zip(x.shape[2:], padding)) + (x.shape[1],)
    out = np.zeros(padded, dtype=x.dtype)
    inner = (slice(None),) + tuple(slice(p, p + n) for p, n in zip(padding, x.shape[2:])) + (slice(None),)
    out[inner] = np.moveaxis(x, 1, -1)
    return out


def _to_first(y: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.moveaxis(y, -1, 1))


def _im2col(xp: np.ndarray, ksize: tuple, stride: tuple) -> tuple[np.ndarray, tuple]:
    """Patches of channel-last ``xp`` [B, *P, C] as rows ordered (*k, C)."""
    d = len(ksize)
    spatial = xp.shape[1:1 + d]
    out = tuple((n - k) // s + 1 for n, k, s in zip(spatial, ksize, stride))
    st = xp.strides
    view = as_strided(
        xp,
        shape=(xp.shape[0],) + out + ksize + (xp.shape[-1],),
        strides=(st[0],) + tuple(st[1 + i] * stride[i] for i in range(d)) + st[1:1 + d] + (st[-1],),
        writeable=False,
    )
    return view.reshape(xp.shape[0] * int(np.prod(out)), -1), out


def _scatter(rows: np.ndarray, kernel: np.ndarray, out: tuple, padded_shape: tuple, stride: tuple) -> np.ndarray:
    """Transposed correlation: spread each row of ``rows`` through ``kernel``.

    ``rows`` is [B * prod(out), A] and ``kernel`` is [A, Cout, *k]. Result is
    channel-last with ``padded_shape``. One small matmul and one strided add
    per kernel tap; this avoids building the full [rows, k * Cout] matrix,
    which for 7x7x7 kernels does not fit in cache.
    """
    ksize = kernel.shape[2:]
    taps = np.ascontiguousarray(np.moveaxis(kernel, (0, 1), (-2, -1)))  # [*k, A, Cout]
    block = (padded_shape[0],) + tuple(out) + (padded_shape[-1],)
    y = np.zeros(padded_shape, dtype=np.result_type(rows, kernel))
    for offset in itertools.product(*(range(k) for k in ksize)):
        target = (slice(None),) + tuple(
            slice(o, o + s * (m - 1) + 1, s) for o, s, m in zip(offset, stride, out)
        )
        y[target] += (rows @ taps[offset]).reshape(block)
    return y


def _crop(xp: np.ndarray, padding: tuple) -> np.ndarray:
    """Remove spatial padding from a channel-last array."""
    if not any(padding):
        return xp
    index = (slice(None),) + tuple(slice(p, xp.shape[1 + i] - p) for i, p in enumerate(padding)) + (slice(None),)
    return xp[index]


def _check_bias(bias, cout: int):
    if bias is not None and bias.shape != (cout,):
        raise ShapeError(f"bias shape {bias.shape} != ({cout},)")


def _kernel_rows(kernel: np.ndarray) -> np.ndarray:
    """[A, B, *k] -> [(*k, B), A] so it multiplies (*k, C)-ordered patch rows."""
    d = kernel.ndim - 2
    return kernel.transpose(tuple(range(2, 2 + d)) + (1, 0)).reshape(-1, kernel.shape[0])


def _kernel_from_rows(rows: np.ndarray, shape: tuple) -> np.ndarray:
    d = len(shape) - 2
    k = rows.reshape(shape[2:] + (shape[1], shape[0]))
    return k.transpose((d + 1, d) + tuple(range(d)))


def _conv_nd(x: Tensor, kernel: Tensor, bias, stride, padding, d: int, op: str) -> Tensor:
    if x.ndim != d + 2 or kernel.ndim != d + 2:
        raise ShapeError(f"{op}: expected {d + 2}-d input and kernel, got {x.shape} and {kernel.shape}")
    cout, cin = kernel.shape[:2]
    if x.shape[1] != cin:
        raise ShapeError(f"{op}: input has {x.shape[1]} channels, kernel expects {cin}")
    _check_bias(bias, cout)
    ksize = kernel.shape[2:]
    stride = _per_axis(stride, d, "stride")
    padding = _per_axis(padding, d, "padding")
    if min(stride) < 1:
        raise ValueError(f"{op}: stride must be >= 1, got {stride}")
    for n, k, p in zip(x.shape[2:], ksize, padding):
        if k > n + 2 * p:
            raise ShapeError(f"{op}: kernel {ksize} larger than padded input {x.shape[2:]} (+2*{padding})")

    xp = _to_last(x.data, padding)
    cols, out = _im2col(xp, ksize, stride)
    wrows = _kernel_rows(kernel.data)
    y = cols @ wrows
    if bias is not None:
        y += bias.data
    batch = x.shape[0]
    y = _to_first(y.reshape((batch,) + out + (cout,)))
    parents = (x, kernel) if bias is None else (x, kernel, bias)
    need_x, need_k, need_b = x.requires_grad, kernel.requires_grad, bias is not None and bias.requires_grad

    def backward(g):
        gmat = np.moveaxis(g, 1, -1).reshape(-1, cout)
        gx = gk = gb = None
        if need_k:
            gk = _kernel_from_rows(cols.T @ gmat, kernel.shape)
        if need_b:
            gb = gmat.sum(axis=0)
        if need_x:
            if flip_ok:
                # stride 1: input gradient is a correlation with the flipped, channel-swapped kernel
                gcols, _ = _im2col(_to_last(g, tuple(k - 1 - p for k, p in zip(ksize, padding))), ksize, stride)
                gx = _to_first((gcols @ flipped_rows).reshape(x.shape[:1] + x.shape[2:] + (cin,)))
            else:
                gx = _to_first(_crop(_scatter(gmat, kernel.data, out, xp.shape, stride), padding))
        return gx, gk, gb

    flip_ok = all(s == 1 for s in stride) and all(p <= k - 1 for k, p in zip(ksize, padding))
    if flip_ok and need_x:
        flipped = kernel.data[(slice(None), slice(None)) + (slice(None, None, -1),) * d].swapaxes(0, 1)
        flipped_rows = _kernel_rows(flipped)
    return make_result(y, parents, backward, op)


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor | None = None, padding="same", stride=1) -> Tensor:
    """2D cross-correlation of ``x`` [B, Cin, H, W] with ``kernel`` [Cout, Cin, kh, kw].

    ``padding="same"`` pads by ``k // 2`` on each side and requires odd
    kernel extents, so the spatial extent is preserved at stride 1.
    """
    if isinstance(padding, str):
        if padding != "same":
            raise ValueError(f"unknown padding mode {padding!r}")
        if any(k % 2 == 0 for k in kernel.shape[2:]):
            raise ShapeError(f"conv2d: 'same' padding needs odd kernel extents, got {kernel.shape[2:]}")
        padding = tuple(k // 2 for k in kernel.shape[2:])
    return _conv_nd(x, kernel, bias, stride, padding, 2, "conv2d")


def conv3d(x: Tensor, kernel: Tensor, bias: Tensor | None = None, stride=1, padding=0) -> Tensor:
    """3D cross-correlation of ``x`` [B, C, T, H, W] with ``kernel`` [Cout, Cin, kt, kh, kw]."""
    return _conv_nd(x, kernel, bias, stride, padding, 3, "conv3d")


def conv3d_transposed(
    x: Tensor, kernel: Tensor, bias: Tensor | None = None, stride=1, padding=0, output_padding=0
) -> Tensor:
    """Adjoint of :func:`conv3d` (plus bias).

    ``kernel`` has the layout of the forward conv it transposes,
    [C_in_here, C_out_here, kt, kh, kw], so
    ``<conv3d(u, K), v> == <u, conv3d_transposed(v, K)>`` for matching geometry.
    """
    d = 3
    if x.ndim != d + 2 or kernel.ndim != d + 2:
        raise ShapeError(f"conv3d_transposed: expected 5-d input and kernel, got {x.shape} and {kernel.shape}")
    cin, cout = kernel.shape[:2]
    if x.shape[1] != cin:
        raise ShapeError(f"conv3d_transposed: input has {x.shape[1]} channels, kernel expects {cin}")
    _check_bias(bias, cout)
    ksize = kernel.shape[2:]
    stride = _per_axis(stride, d, "stride")
    padding = _per_axis(padding, d, "padding")
    output_padding = _per_axis(output_padding, d, "output_padding")
    if min(stride) < 1:
        raise ValueError(f"conv3d_transposed: stride must be >= 1, got {stride}")
    for op_, s in zip(output_padding, stride):
        if not 0 <= op_ < s:
            raise ShapeError(f"conv3d_transposed: output_padding {output_padding} must be in [0, stride {stride})")
    m = x.shape[2:]
    n = tuple(transposed_output_size(mi, k, s, p, o) for mi, k, s, p, o in zip(m, ksize, stride, padding, output_padding))
    if min(n) < 1:
        raise ShapeError(f"conv3d_transposed: geometry gives non-positive output extent {n}")

    batch = x.shape[0]
    padded_shape = (batch,) + tuple(ni + 2 * p for ni, p in zip(n, padding)) + (cout,)
    xmat = np.moveaxis(x.data, 1, -1).reshape(-1, cin)
    krows = _kernel_rows(kernel.data).T  # [Cin, (*k, Cout)]
    y = _crop(_scatter(xmat, kernel.data, m, padded_shape, stride), padding)
    if bias is not None:
        y = y + bias.data
    y = _to_first(y)
    parents = (x, kernel) if bias is None else (x, kernel, bias)
    need_x, need_k, need_b = x.requires_grad, kernel.requires_grad, bias is not None and bias.requires_grad

    def backward(g):
        gcols, _ = _im2col(_to_last(g, padding), ksize, stride)
        gx = gk = gb = None
        if need_x:
            gx = _to_first((gcols @ krows.T).reshape((batch,) + m + (cin,)))
        if need_k:
            gk = _kernel_from_rows((xmat.T @ gcols).T, kernel.shape)
        if need_b:
            gb = g.sum(axis=(0,) + tuple(range(2, 2 + d)))
        return gx, gk, gb

    return make_result(y, parents, backward, "conv3d_transposed")
