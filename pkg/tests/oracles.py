"""Slow, obviously-correct reference implementations used as test oracles.

Nothing here imports the library's numerics; every value is computed with
explicit Python loops over scalars.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def conv_loop(x, kernel, stride, padding):
    """Cross-correlation of x [B, Cin, *S] with kernel [Cout, Cin, *K], zero padded."""
    x = np.asarray(x, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    d = x.ndim - 2
    stride = (stride,) * d if np.isscalar(stride) else tuple(stride)
    padding = (padding,) * d if np.isscalar(padding) else tuple(padding)
    spatial, ksize = x.shape[2:], kernel.shape[2:]
    out_shape = tuple((n + 2 * p - k) // s + 1 for n, k, s, p in zip(spatial, ksize, stride, padding))
    out = np.zeros((x.shape[0], kernel.shape[0]) + out_shape)
    for b, co in itertools.product(range(x.shape[0]), range(kernel.shape[0])):
        for o in itertools.product(*(range(m) for m in out_shape)):
            acc = 0.0
            for ci in range(x.shape[1]):
                for off in itertools.product(*(range(k) for k in ksize)):
                    pos = tuple(oi * s + di - p for oi, s, di, p in zip(o, stride, off, padding))
                    if all(0 <= q < n for q, n in zip(pos, spatial)):
                        acc += x[(b, ci) + pos] * kernel[(co, ci) + off]
            out[(b, co) + o] = acc
    return out


def transposed_conv_loop(y, kernel, stride, padding, out_extent):
    """Scatter form of the transposed 3D conv: kernel [Cin, Cout, *K] as stored for the forward map."""
    y = np.asarray(y, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    d = y.ndim - 2
    stride = (stride,) * d if np.isscalar(stride) else tuple(stride)
    padding = (padding,) * d if np.isscalar(padding) else tuple(padding)
    out = np.zeros((y.shape[0], kernel.shape[1]) + tuple(out_extent))
    for b, ci in itertools.product(range(y.shape[0]), range(y.shape[1])):
        for o in itertools.product(*(range(m) for m in y.shape[2:])):
            for co in range(kernel.shape[1]):
                for off in itertools.product(*(range(k) for k in kernel.shape[2:])):
                    pos = tuple(oi * s + di - p for oi, s, di, p in zip(o, stride, off, padding))
                    if all(0 <= q < n for q, n in zip(pos, out_extent)):
                        out[(b, co) + pos] += y[(b, ci) + o] * kernel[(ci, co) + off]
    return out


def _sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v))


def convlstm_loop(p: dict, x, h, c):
    """One peephole ConvLSTM step for a single sample, scalar by scalar.

    ``p`` maps the usual names to float64 arrays; x is [Cin, H, W], h and c are [C, H, W].
    """
    cin, rows, cols = x.shape
    ch = h.shape[0]
    k = p["W_xi"].shape[-1]
    r = k // 2

    def conv(w, src, co, i, j):
        acc = 0.0
        for ci in range(src.shape[0]):
            for di in range(k):
                for dj in range(k):
                    a, b = i + di - r, j + dj - r
                    if 0 <= a < rows and 0 <= b < cols:
                        acc += w[co, ci, di, dj] * src[ci, a, b]
        return acc

    new_c = np.zeros_like(c)
    new_h = np.zeros_like(h)
    for co in range(ch):
        for i in range(rows):
            for j in range(cols):
                pre = {g: conv(p[f"W_x{g}"], x, co, i, j) + conv(p[f"W_h{g}"], h, co, i, j) + p[f"b_{g}"][co]
                       for g in "ifco"}
                gi = _sigmoid(pre["i"] + p["W_ci"][co, i, j] * c[co, i, j])
                gf = _sigmoid(pre["f"] + p["W_cf"][co, i, j] * c[co, i, j])
                cc = gf * c[co, i, j] + gi * math.tanh(pre["c"])
                go = _sigmoid(pre["o"] + p["W_co"][co, i, j] * cc)
                new_c[co, i, j] = cc
                new_h[co, i, j] = go * math.tanh(cc)
    return new_h, new_c


def sse_loop(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    total = 0.0
    for u, v in zip(a.tolist(), b.tolist()):
        total += (u - v) ** 2
    return total


def psnr_loop(x, y, peak) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    n = x.size
    mse = sse_loop(x, y) / n
    return 10.0 * math.log10(peak * peak / mse)


def adam_scalar(grad_fn, w0, lr, steps, beta1=0.9, beta2=0.999, eps=1e-8):
    """Trajectory of a single scalar under textbook Adam."""
    w, m, v, out = w0, 0.0, 0.0, []
    for t in range(1, steps + 1):
        g = grad_fn(w)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1 ** t)
        vhat = v / (1 - beta2 ** t)
        w = w - lr * mhat / (math.sqrt(vhat) + eps)
        out.append(w)
    return out


def window_enumeration(length, span, stride):
    """Start indices of every full window, found by brute force."""
    return [s for s in range(length) if s % stride == 0 and s + span <= length]
