"""Task-specific physical priors.

Each extractor turns an RGB image in [0, 1] (shape [H, W, 3]) into a
single-channel prior map in [0, 1] (shape [H, W]):

- haze:       per-pixel dark channel
- shadow:     log-chromaticity projection onto an illumination-invariant
              axis at angle theta, percentile-normalized
- low light:  Weberized structure energy from Gaussian-derivative ratios
              in an opponent color space
- rain:       amplified luminance difference between the degraded shot
              and a rain-free reference (ground-truth mode), or a small
              learned U-net prediction (see model.RainMaskNet)

Extractors are plain numpy. ``shadow_projection_tape`` mirrors the shadow
path on the differentiation tape so the angle can be trained; the two
routes are asserted equal in the tests.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from . import engine as E
from .errors import ConfigurationError, DimensionError

GRAY_WEIGHTS = (0.299, 0.587, 0.114)

# Gaussian color model: rows map RGB to luminance E and the two opponent
# derivatives E_l, E_ll.
COLOR_MODEL = np.array(
    [
        [0.06, 0.63, 0.27],
        [0.30, 0.04, -0.35],
        [0.34, -0.60, 0.17],
    ]
)

LOG_EPS = 1e-4
DEGENERATE_WINDOW = 1e-8
DEGENERATE_VALUE = 0.5


def _require_rgb(img, name):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise DimensionError(f"{name}: expected [H,W,3], got {img.shape}")
    return img


def gray(img):
    """Luminance 0.299 R + 0.587 G + 0.114 B."""
    img = _require_rgb(img, "gray")
    r, g, b = GRAY_WEIGHTS
    return r * img[..., 0] + g * img[..., 1] + b * img[..., 2]


def dark_channel(img):
    """Per-pixel minimum over RGB (window size 1)."""
    img = _require_rgb(img, "dark_channel")
    return img.min(axis=2)


def rain_mask_gt(drop, blur, alpha=5.0):
    """Ground-truth rain mask: clip(alpha * Gray(|drop - blur|), 0, 1)."""
    drop = _require_rgb(drop, "rain_mask_gt")
    blur = _require_rgb(blur, "rain_mask_gt")
    if drop.shape != blur.shape:
        raise DimensionError(
            f"rain_mask_gt: extents {drop.shape} and {blur.shape} differ"
        )
    return np.clip(alpha * gray(np.abs(drop - blur)), 0.0, 1.0)


def log_chromaticity(img, eps=LOG_EPS):
    """Log ratios (rho_R, rho_G, rho_B) against the geometric channel mean.

    The three fields sum to zero pixelwise by construction.
    """
    img = _require_rgb(img, "log_chromaticity")
    logs = np.log(np.clip(img, eps, 1.0))
    mu = logs.mean(axis=2)
    return logs[..., 0] - mu, logs[..., 1] - mu, logs[..., 2] - mu


def shadow_projection(img, theta=0.0, eps=LOG_EPS):
    """Raw illumination-invariant projection rho_R cos(theta) + rho_B sin(theta)."""
    rho_r, _, rho_b = log_chromaticity(img, eps)
    return rho_r * np.cos(theta) + rho_b * np.sin(theta)


def shadow_prior(img, theta=0.0, eps=LOG_EPS):
    """Shadow prior: projection normalized between its 2nd and 98th percentiles.

    A degenerate percentile window (spread < 1e-8, e.g. a constant image)
    yields the 0.5 sentinel map.
    """
    s = shadow_projection(img, theta, eps)
    p2, p98 = np.percentile(s, (2.0, 98.0))
    if p98 - p2 < DEGENERATE_WINDOW:
        return np.full(s.shape, DEGENERATE_VALUE)
    return np.clip((s - p2) / (p98 - p2), 0.0, 1.0)


def shadow_projection_tape(img, theta, eps=LOG_EPS):
    """Tape twin of shadow_prior for a learnable angle parameter.

    The log-chromaticity fields are constants; only the rotation, the
    percentile window, and the normalization live on the tape. Returns a
    [H, W] tensor. On a degenerate window the map is the constant
    sentinel and the gradient path to theta is cut, matching the numpy
    route.
    """
    rho_r, _, rho_b = log_chromaticity(img, eps)
    s = E.add(
        E.mul(E.constant(rho_r), E.cos(theta)),
        E.mul(E.constant(rho_b), E.sin(theta)),
    )
    p2 = E.percentile(s, 2.0)
    p98 = E.percentile(s, 98.0)
    spread = float(p98.data) - float(p2.data)
    if spread < DEGENERATE_WINDOW:
        return E.constant(np.full(rho_r.shape, DEGENERATE_VALUE))
    return E.clip(E.div(E.sub(s, p2), E.sub(p98, p2)), 0.0, 1.0)


def gaussian_derivative_kernels(sigma):
    """Sampled 2-D Gaussian and derivative kernels at scale sigma.

    Returns a dict with the smoothing kernel and the x/y first and second
    derivative kernels, each an outer product of 1-D profiles on a radius
    ceil(3*sigma) grid. The smoothing profile is normalized to unit sum
    before differentiation. Profiles are oriented for correlation, so
    the dx response to a ramp of slope 1 is approximately +1.
    """
    sigma = float(sigma)
    if sigma <= 0:
        raise ConfigurationError(f"sigma must be positive, got {sigma}")
    radius = max(1, int(np.ceil(3.0 * sigma)))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(t * t) / (2.0 * sigma * sigma))
    g /= g.sum()
    g1 = t / (sigma * sigma) * g
    g2 = (t * t - sigma * sigma) / (sigma**4) * g
    return {
        "smooth": np.outer(g, g),
        "dx": np.outer(g, g1),
        "dy": np.outer(g1, g),
        "dxx": np.outer(g, g2),
        "dyy": np.outer(g2, g),
    }


def structure_prior(img, scales=(1.0,), eps=LOG_EPS):
    """Weberized structure prior from opponent-channel derivative ratios.

    For every scale and for derivative orders k = 0 (smoothing), 1 (x, y)
    and 2 (xx, yy), accumulates (D E_l / (D E + eps))^2 where E and E_l
    are the first two Gaussian color model channels, then min-max
    normalizes. Filtering uses reflect boundaries. A flat response map
    (spread < 1e-8) yields the 0.5 sentinel.
    """
    img = _require_rgb(img, "structure_prior")
    e = (
        COLOR_MODEL[0, 0] * img[..., 0]
        + COLOR_MODEL[0, 1] * img[..., 1]
        + COLOR_MODEL[0, 2] * img[..., 2]
    )
    el = (
        COLOR_MODEL[1, 0] * img[..., 0]
        + COLOR_MODEL[1, 1] * img[..., 1]
        + COLOR_MODEL[1, 2] * img[..., 2]
    )
    w = np.zeros(e.shape)
    for sigma in scales:
        kernels = gaussian_derivative_kernels(sigma)
        for key in ("smooth", "dx", "dy", "dxx", "dyy"):
            k = kernels[key]
            num = ndimage.correlate(el, k, mode="reflect")
            den = ndimage.correlate(e, k, mode="reflect")
            r = num / (den + eps)
            w += r * r
    lo, hi = w.min(), w.max()
    if hi - lo < DEGENERATE_WINDOW:
        return np.full(w.shape, DEGENERATE_VALUE)
    return (w - lo) / (hi - lo)


def extract_prior(task, img, theta=0.0, alpha=5.0, scales=(1.0,), blur=None):
    """Dispatch a prior extraction by task name.

    ``derain`` here is the ground-truth mode and needs the rain-free
    reference in ``blur``; predicted masks come from the model side.
    """
    if task == "dehaze":
        return dark_channel(img)
    if task == "deshadow":
        return shadow_prior(img, theta)
    if task == "lowlight":
        return structure_prior(img, scales)
    if task == "derain":
        if blur is None:
            raise ConfigurationError("derain ground-truth mode requires the blur reference")
        return rain_mask_gt(img, blur, alpha)
    raise ConfigurationError(f"unknown task {task!r}")
