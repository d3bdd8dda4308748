"""Spatial operations on [C, H, W] tensors: convolution, pooling, resize.

Convolution is cross-correlation (no kernel flip), zero padding only,
implemented with stride-tricks windows and einsum so the inner loops stay
in BLAS. The backward pass scatters through the same window geometry.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError, DimensionError
from .tensor import Tensor, _make, as_tensor


def _window_view(xp, kh, kw, sh, sw):
    c, hp, wp = xp.shape
    ho = (hp - kh) // sh + 1
    wo = (wp - kw) // sw + 1
    s0, s1, s2 = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp,
        shape=(c, ho, wo, kh, kw),
        strides=(s0, s1 * sh, s2 * sw, s1, s2),
        writeable=False,
    )


def conv2d(x, weight, bias=None, stride=1, padding=0, groups=1):
    """2-D grouped convolution.

    x:      [C_in, H, W]
    weight: [C_out, C_in/groups, kh, kw]
    bias:   [C_out] or None
    Output extents are (H + 2*padding - kh)//stride + 1 and likewise for W.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if bias is not None:
        bias = as_tensor(bias)
    if x.data.ndim != 3 or weight.data.ndim != 4:
        raise DimensionError(
            f"conv2d: expected [C,H,W] input and [O,I,kh,kw] weight, got {x.data.shape} and {weight.data.shape}"
        )
    c_in, h, w = x.data.shape
    c_out, c_in_g, kh, kw = weight.data.shape
    if groups < 1 or c_in % groups or c_out % groups:
        raise ConfigurationError(
            f"conv2d: groups={groups} must divide C_in={c_in} and C_out={c_out}"
        )
    if c_in_g != c_in // groups:
        raise DimensionError(
            f"conv2d: weight shape {weight.data.shape} does not match C_in={c_in} with groups={groups}"
        )
    s, p = int(stride), int(padding)
    if s < 1 or p < 0:
        raise ConfigurationError(f"conv2d: stride={stride}, padding={padding} out of range")
    if h + 2 * p < kh or w + 2 * p < kw:
        raise DimensionError(
            f"conv2d: kernel ({kh},{kw}) exceeds padded input ({h + 2 * p},{w + 2 * p})"
        )

    xp = np.pad(x.data, ((0, 0), (p, p), (p, p))) if p else x.data
    win = _window_view(xp, kh, kw, s, s)  # [C_in, Ho, Wo, kh, kw]
    ho, wo = win.shape[1], win.shape[2]
    wing = win.reshape(groups, c_in // groups, ho, wo, kh, kw)
    wg = weight.data.reshape(groups, c_out // groups, c_in // groups, kh, kw)
    out = np.einsum("gihwkl,goikl->gohw", wing, wg, optimize=True).reshape(c_out, ho, wo)
    if bias is not None:
        out = out + bias.data[:, None, None]

    def bwd(g):
        go = g.reshape(groups, c_out // groups, ho, wo)
        dweight = np.einsum("gihwkl,gohw->goikl", wing, go, optimize=True).reshape(
            weight.data.shape
        )
        dxp = np.zeros_like(xp)
        for u in range(kh):
            for v in range(kw):
                contrib = np.einsum("gohw,goi->gihw", go, wg[:, :, :, u, v], optimize=True)
                dxp[:, u : u + s * ho : s, v : v + s * wo : s] += contrib.reshape(c_in, ho, wo)
        dx = dxp[:, p : p + h, p : p + w] if p else dxp
        grads = [dx, dweight]
        if bias is not None:
            grads.append(g.sum(axis=(1, 2)))
        return tuple(grads)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _make(out, parents, bwd)


def avg_pool2(x):
    """2x2 average pooling with stride 2; odd extents keep a trailing
    window that averages only the pixels it covers. Output extents are
    ceil(H/2) x ceil(W/2)."""
    x = as_tensor(x)
    if x.data.ndim != 3:
        raise DimensionError(f"avg_pool2: expected [C,H,W], got {x.data.shape}")
    c, h, w = x.data.shape
    ho, wo = (h + 1) // 2, (w + 1) // 2
    ph, pw = 2 * ho - h, 2 * wo - w
    xp = np.pad(x.data, ((0, 0), (0, ph), (0, pw))) if (ph or pw) else x.data
    sums = xp.reshape(c, ho, 2, wo, 2).sum(axis=(2, 4))
    rows = np.full(ho, 2.0)
    cols = np.full(wo, 2.0)
    if ph:
        rows[-1] = 1.0
    if pw:
        cols[-1] = 1.0
    counts = rows[:, None] * cols[None, :]
    out = sums / counts

    def bwd(g):
        gg = g / counts
        up = np.repeat(np.repeat(gg, 2, axis=1), 2, axis=2)
        return (up[:, :h, :w],)

    return _make(out, (x,), bwd)


def _resize_axis_index(n_out, n_in):
    # Half-pixel source coordinates, clamped to the valid range.
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = src - i0
    return i0, i1, frac


def bilinear_resize(x, out_hw):
    """Bilinear resize of [C, H, W] to [C, out_h, out_w] (half-pixel grid)."""
    x = as_tensor(x)
    if x.data.ndim != 3:
        raise DimensionError(f"bilinear_resize: expected [C,H,W], got {x.data.shape}")
    c, h, w = x.data.shape
    oh, ow = int(out_hw[0]), int(out_hw[1])
    if oh < 1 or ow < 1:
        raise ConfigurationError(f"bilinear_resize: bad target extents {out_hw}")
    y0, y1, fy = _resize_axis_index(oh, h)
    x0, x1, fx = _resize_axis_index(ow, w)
    wy = fy[None, :, None]
    wx = fx[None, None, :]
    rows = x.data[:, y0, :] * (1.0 - wy) + x.data[:, y1, :] * wy  # [C, oh, W]
    out = rows[:, :, x0] * (1.0 - wx) + rows[:, :, x1] * wx

    def bwd(g):
        grows = np.zeros((c, oh, w), dtype=g.dtype)
        np.add.at(grows, (slice(None), slice(None), x0), g * (1.0 - wx))
        np.add.at(grows, (slice(None), slice(None), x1), g * wx)
        gx = np.zeros_like(x.data)
        np.add.at(gx, (slice(None), y0, slice(None)), grows * (1.0 - wy))
        np.add.at(gx, (slice(None), y1, slice(None)), grows * wy)
        return (gx,)

    return _make(out, (x,), bwd)
