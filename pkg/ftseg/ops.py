"""Spatial operations on NCHW tensors."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .enums import Padding
from .exceptions import ShapeError
from .tensor import Tensor, note_branch, record


def _require_nchw(x: Tensor, op: str) -> tuple[int, int, int, int]:
    if x.ndim != 4:
        raise ShapeError(f"{op}: expected an N×C×H×W tensor, got shape {x.shape}")
    return x.shape


def conv2d(
    x: Tensor,
    kernel: Tensor,
    bias: Tensor | None = None,
    padding: Padding | str = Padding.SAME,
) -> Tensor:
    """2-D cross-correlation (no kernel flip) with zero padding.

    Args:
        x: Input of shape (N, C, H, W).
        kernel: Weights of shape (O, C, kh, kw).
        bias: Optional per-output-channel bias of shape (O,).
        padding: `same` keeps H and W (odd kernels only); `valid` shrinks them.

    Returns:
        Tensor of shape (N, O, H', W').
    """
    padding = Padding(padding)
    n, c, h, w = _require_nchw(x, "conv2d")
    if kernel.ndim != 4:
        raise ShapeError(f"conv2d: kernel must be O×C×kh×kw, got shape {kernel.shape}")
    o, kc, kh, kw = kernel.shape
    if kc != c:
        raise ShapeError(
            f"conv2d: input has {c} channels but kernel {kernel.shape} expects {kc}"
        )
    if bias is not None and bias.shape != (o,):
        raise ShapeError(f"conv2d: bias must have shape ({o},), got {bias.shape}")
    if padding is Padding.SAME:
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeError(f"conv2d: same padding needs odd kernel sizes, got {kh}×{kw}")
        ph, pw = kh // 2, kw // 2
    else:
        ph = pw = 0
    oh, ow = h + 2 * ph - kh + 1, w + 2 * pw - kw + 1
    if oh < 1 or ow < 1:
        raise ShapeError(f"conv2d: kernel {kh}×{kw} is larger than input {h}×{w}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    cols = sliding_window_view(xp, (kh, kw), axis=(2, 3))  # N, C, oh, ow, kh, kw
    out = np.tensordot(cols, kernel.data, axes=([1, 4, 5], [1, 2, 3]))
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
    if bias is not None:
        out += bias.data[None, :, None, None]

    def backward(g: np.ndarray):
        d_kernel = np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3]))
        d_xp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                d_xp[:, :, i : i + oh, j : j + ow] += np.tensordot(
                    g, kernel.data[:, :, i, j], axes=([1], [0])
                ).transpose(0, 3, 1, 2)
        d_x = d_xp[:, :, ph : ph + h, pw : pw + w]
        d_bias = g.sum(axis=(0, 2, 3)) if bias is not None else None
        return d_x, d_kernel, d_bias

    inputs = (x, kernel) if bias is None else (x, kernel, bias)
    return record("conv2d", out, inputs, backward)


def _windows(data: np.ndarray) -> np.ndarray:
    """View N×C×H×W as N×C×H/2×W/2×4 (row-major within each 2×2 window)."""
    n, c, h, w = data.shape
    return (
        data.reshape(n, c, h // 2, 2, w // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h // 2, w // 2, 4)
    )


def _unwindows(data: np.ndarray, shape: tuple[int, int, int, int]) -> np.ndarray:
    n, c, h, w = shape
    return (
        data.reshape(n, c, h // 2, w // 2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h, w)
    )


def _require_even(x: Tensor, op: str) -> None:
    _, _, h, w = _require_nchw(x, op)
    if h % 2 or w % 2:
        raise ShapeError(f"{op}: spatial size {h}×{w} must be even")


def maxpool2d(x: Tensor) -> Tensor:
    """2×2 max pooling, stride 2; ties route the gradient to the first index."""
    _require_even(x, "maxpool2d")
    windows = _windows(x.data)
    argmax = windows.argmax(axis=-1)[..., None]
    note_branch(argmax)
    out = np.take_along_axis(windows, argmax, axis=-1)[..., 0]

    def backward(g: np.ndarray):
        scattered = np.zeros(windows.shape)
        np.put_along_axis(scattered, argmax, g[..., None], axis=-1)
        return (_unwindows(scattered, x.shape),)

    return record("maxpool2d", out, (x,), backward)


def avgpool2d(x: Tensor) -> Tensor:
    """2×2 average pooling, stride 2."""
    _require_even(x, "avgpool2d")
    out = _windows(x.data).mean(axis=-1)

    def backward(g: np.ndarray):
        spread = np.repeat(np.repeat(g, 2, axis=2), 2, axis=3)
        return (spread / 4.0,)

    return record("avgpool2d", out, (x,), backward)


@lru_cache(maxsize=64)
def interpolation_matrix(size: int, factor: int) -> np.ndarray:
    """Linear interpolation weights (size·factor × size), align-corners=false."""
    weights = np.zeros((size * factor, size))
    for o in range(size * factor):
        src = max((o + 0.5) / factor - 0.5, 0.0)
        i0 = min(int(np.floor(src)), size - 1)
        i1 = min(i0 + 1, size - 1)
        frac = src - i0
        weights[o, i0] += 1.0 - frac
        weights[o, i1] += frac
    weights.setflags(write=False)
    return weights


def upsample_bilinear(x: Tensor, factor: int = 2) -> Tensor:
    """Bilinear upsampling by an integer factor."""
    _, _, h, w = _require_nchw(x, "upsample_bilinear")
    if factor < 1:
        raise ShapeError(f"upsample_bilinear: factor must be positive, got {factor}")
    rows = interpolation_matrix(h, factor)
    cols = interpolation_matrix(w, factor)
    out = rows @ x.data @ cols.T

    def backward(g: np.ndarray):
        return (rows.T @ g @ cols,)

    return record("upsample_bilinear", out, (x,), backward)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Stack along the channel axis; `a` occupies the leading channels."""
    na, ca, ha, wa = _require_nchw(a, "concat_channels")
    nb, _, hb, wb = _require_nchw(b, "concat_channels")
    if (na, ha, wa) != (nb, hb, wb):
        raise ShapeError(
            f"concat_channels: N/H/W mismatch between {a.shape} and {b.shape}"
        )
    out = np.concatenate([a.data, b.data], axis=1)
    return record(
        "concat_channels", out, (a, b), lambda g: (g[:, :ca], g[:, ca:])
    )


def slice_channels(x: Tensor, start: int, stop: int) -> Tensor:
    _, c, _, _ = _require_nchw(x, "slice_channels")
    if not 0 <= start <= stop <= c:
        raise ShapeError(f"slice_channels: [{start}, {stop}) outside 0..{c}")

    def backward(g: np.ndarray):
        full = np.zeros(x.shape)
        full[:, start:stop] = g
        return (full,)

    return record("slice_channels", x.data[:, start:stop].copy(), (x,), backward)
