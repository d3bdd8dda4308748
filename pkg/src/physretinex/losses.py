"""Training objective and image metrics.

total_loss sums, over the three supervision levels, a Charbonnier term,
a structural dissimilarity term, and a spectral L1 term, weighted
0.25 / 0.5 / 1.0 coarse to fine:

    sum_i w_i * ( L_cb(I_i, T_i)
                  + lambda_ssim * (1 - SSIM(I_i, T_i))
                  + lambda_fft * L_fft(I_i, T_i)
                  + lambda_p * L_p(I_i, T_i) )

The perceptual slot L_p is a pluggable hook and contributes nothing
unless one is supplied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import engine as E
from .errors import ConfigurationError, DimensionError

CHARBONNIER_EPS = 1e-3
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


@dataclass
class LossWeights:
    level_weights: tuple = (0.25, 0.5, 1.0)
    lambda_ssim: float = 0.5
    lambda_fft: float = 1e-4
    lambda_p: float = 0.5


def charbonnier(x, y, eps=CHARBONNIER_EPS):
    """Mean of sqrt((x-y)^2 + eps^2); equals eps exactly when x == y."""
    x, y = E.as_tensor(x), E.as_tensor(y)
    if x.data.shape != y.data.shape:
        raise DimensionError(f"charbonnier: shapes {x.data.shape} != {y.data.shape}")
    d = E.sub(x, y)
    return E.rmean(E.sqrt(E.add(E.mul(d, d), eps * eps)))


def gaussian_window(size=11, sigma=1.5):
    """Normalized 2-D Gaussian window."""
    if size < 1 or size % 2 == 0:
        raise ConfigurationError(f"ssim window size must be odd and positive, got {size}")
    t = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(t * t) / (2.0 * sigma * sigma))
    g /= g.sum()
    return np.outer(g, g)


def ssim(x, y, window=11, sigma=1.5):
    """Structural similarity over valid windows, averaged over channels.

    Inputs are [C, H, W] (or [H, W]); statistics come from a Gaussian
    window (default 11x11, sigma 1.5) with the standard stabilizers
    C1 = 0.01^2, C2 = 0.03^2 for unit dynamic range. Output is a scalar
    in [-1, 1]; identical inputs give exactly 1.
    """
    x, y = E.as_tensor(x), E.as_tensor(y)
    if x.data.shape != y.data.shape:
        raise DimensionError(f"ssim: shapes {x.data.shape} != {y.data.shape}")
    if x.data.ndim == 2:
        x, y = E.reshape(x, (1,) + x.data.shape), E.reshape(y, (1,) + y.data.shape)
    if x.data.ndim != 3:
        raise DimensionError(f"ssim: expected [C,H,W], got {x.data.shape}")
    c, h, w = x.data.shape
    if h < window or w < window:
        raise ConfigurationError(
            f"ssim: image ({h},{w}) is smaller than the {window}x{window} window"
        )
    kernel = E.constant(np.broadcast_to(gaussian_window(window, sigma), (c, 1, window, window)).copy())

    def filt(t):
        return E.conv2d(t, kernel, groups=c, padding=0)

    mu_x = filt(x)
    mu_y = filt(y)
    mu_xx = E.mul(mu_x, mu_x)
    mu_yy = E.mul(mu_y, mu_y)
    mu_xy = E.mul(mu_x, mu_y)
    var_x = E.sub(filt(E.mul(x, x)), mu_xx)
    var_y = E.sub(filt(E.mul(y, y)), mu_yy)
    cov = E.sub(filt(E.mul(x, y)), mu_xy)
    num = E.mul(E.add(E.mul(2.0, mu_xy), SSIM_C1), E.add(E.mul(2.0, cov), SSIM_C2))
    den = E.mul(E.add(E.add(mu_xx, mu_yy), SSIM_C1), E.add(E.add(var_x, var_y), SSIM_C2))
    return E.rmean(E.div(num, den))


def fft_loss(x, y):
    """Mean absolute difference between the real and imaginary spectrum
    components (unnormalized forward transform, per channel)."""
    x, y = E.as_tensor(x), E.as_tensor(y)
    if x.data.shape != y.data.shape:
        raise DimensionError(f"fft_loss: shapes {x.data.shape} != {y.data.shape}")
    xre, xim = E.fft2(x)
    yre, yim = E.fft2(y)
    dre = E.rsum(E.absolute(E.sub(xre, yre)))
    dim = E.rsum(E.absolute(E.sub(xim, yim)))
    return E.div(E.add(dre, dim), 2.0 * x.data.size)


def total_loss(outputs, targets, weights=None, ssim_window=11, ssim_sigma=1.5,
               perceptual_hook=None, return_terms=False):
    """Weighted multi-level objective over (coarse, mid, fine) outputs.

    ``targets`` must match ``outputs`` level for level in count and
    shape. When ``perceptual_hook`` is None the lambda_p slot is
    inactive.
    """
    weights = weights or LossWeights()
    if len(outputs) != len(targets) or len(outputs) != len(weights.level_weights):
        raise ConfigurationError(
            f"level count mismatch: {len(outputs)} outputs, {len(targets)} targets, "
            f"{len(weights.level_weights)} weights"
        )
    total = None
    terms = []
    for w, out, tgt in zip(weights.level_weights, outputs, targets):
        out, tgt = E.as_tensor(out), E.as_tensor(tgt)
        if out.data.shape != tgt.data.shape:
            raise DimensionError(
                f"level shape mismatch: output {out.data.shape} vs target {tgt.data.shape}"
            )
        cb = charbonnier(out, tgt)
        ds = E.sub(1.0, ssim(out, tgt, ssim_window, ssim_sigma))
        sp = fft_loss(out, tgt)
        level = E.add(cb, E.add(E.mul(weights.lambda_ssim, ds), E.mul(weights.lambda_fft, sp)))
        if perceptual_hook is not None:
            level = E.add(level, E.mul(weights.lambda_p, perceptual_hook(out, tgt)))
        terms.append({"charbonnier": cb.item(), "dssim": ds.item(), "fft": sp.item()})
        contrib = E.mul(w, level)
        total = contrib if total is None else E.add(total, contrib)
    if return_terms:
        return total, terms
    return total


def build_target_pyramid(clean_chw):
    """(coarse, mid, fine) targets by repeated 2x2 average pooling."""
    fine = E.constant(np.asarray(clean_chw, dtype=np.float64))
    mid = E.avg_pool2(fine)
    coarse = E.avg_pool2(mid)
    return coarse, mid, fine


def psnr(pred, ref, peak=1.0):
    """10 log10(peak^2 / MSE); identical inputs give math.inf."""
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape:
        raise DimensionError(f"psnr: shapes {pred.shape} != {ref.shape}")
    mse = np.mean((pred - ref) ** 2)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)
