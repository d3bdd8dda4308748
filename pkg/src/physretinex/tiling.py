"""Tiled inference over large images.

Restoration cost grows superlinearly with image area (attention is
quadratic in channel count but the FFT and pooling work scale with
H * W log HW), and peak memory grows with the autodiff-free but still
materialized per-pixel activations. Tiling bounds both: the image is
covered by overlapping fixed-size tiles, each restored independently,
and the results are feathered together.

Each tile carries a separable weight map: a triangular ramp across the
actual overlap with each neighbor (computed from the plan, so edge
snapping is handled), flat 1 elsewhere. Ramps of adjacent tiles are
complementary, so the raw weights already sum to one wherever exactly
one or two tiles cover a pixel; the final divide by the accumulated
weight makes the blend exact even where snapping stacks three tiles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError


@dataclass
class TileSpec:
    tile: int = 256
    overlap: int = 32

    def validate(self) -> "TileSpec":
        if self.tile < 4 or self.tile % 4:
            raise ConfigurationError(f"tile must be a positive multiple of 4, got {self.tile}")
        if not 0 <= 2 * self.overlap < self.tile:
            raise ConfigurationError(
                f"overlap must satisfy 0 <= overlap < tile/2, got {self.overlap} for tile {self.tile}"
            )
        return self


def _axis_starts(length, tile, stride):
    if tile >= length:
        return [0]
    starts = [0]
    while starts[-1] + tile < length:
        starts.append(min(starts[-1] + stride, length - tile))
    return starts


def plan_tiles(height, width, spec):
    """Tile rectangles (y0, x0, h, w) covering an image exactly.

    Interior tiles advance by tile - overlap; the last tile per axis is
    snapped to the image edge, which can deepen its overlap.
    """
    spec.validate()
    if height < 1 or width < 1:
        raise DimensionError(f"image extent must be positive, got {height}x{width}")
    stride = spec.tile - spec.overlap
    ys = _axis_starts(height, spec.tile, stride)
    xs = _axis_starts(width, spec.tile, stride)
    th, tw = min(spec.tile, height), min(spec.tile, width)
    return [(y0, x0, th, tw) for y0 in ys for x0 in xs]


def _axis_weights(starts, tile_len):
    """Per-tile 1-D blend weights; ramps span the actual pair overlaps."""
    weights = []
    for i, s in enumerate(starts):
        w = np.ones(tile_len, dtype=np.float64)
        if i > 0:
            ov = starts[i - 1] + tile_len - s
            j = np.arange(ov, dtype=np.float64)
            w[:ov] = (j + 0.5) / ov
        if i < len(starts) - 1:
            ov = s + tile_len - starts[i + 1]
            j = np.arange(ov, dtype=np.float64)
            w[tile_len - ov :] = np.minimum(w[tile_len - ov :], (ov - j - 0.5) / ov)
        weights.append(w)
    return weights


def tile_weights(height, width, spec):
    """2-D weight maps aligned with plan_tiles, in the same order."""
    plan = plan_tiles(height, width, spec)
    stride = spec.tile - spec.overlap
    ys = _axis_starts(height, spec.tile, stride)
    xs = _axis_starts(width, spec.tile, stride)
    wy = _axis_weights(ys, min(spec.tile, height))
    wx = _axis_weights(xs, min(spec.tile, width))
    maps = [np.outer(wy[i], wx[j]) for i in range(len(ys)) for j in range(len(xs))]
    return plan, maps


def tiled_inference(image, restore_fn, spec):
    """Restore an [H, W, 3] image tile by tile and feather the seams.

    ``restore_fn`` maps an [h, w, 3] tile to a same-shaped restoration.
    Images no larger than one tile are restored in a single call.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise DimensionError(f"expected [H, W, 3], got {image.shape}")
    h, w = image.shape[:2]
    if spec.validate().tile >= max(h, w):
        return np.asarray(restore_fn(image), dtype=np.float64)
    plan, maps = tile_weights(h, w, spec)
    acc = np.zeros_like(image)
    den = np.zeros((h, w), dtype=np.float64)
    for (y0, x0, th, tw), weight in zip(plan, maps):
        restored = np.asarray(restore_fn(image[y0 : y0 + th, x0 : x0 + tw]), dtype=np.float64)
        if restored.shape != (th, tw, 3):
            raise DimensionError(
                f"restore_fn returned {restored.shape}, expected {(th, tw, 3)}"
            )
        acc[y0 : y0 + th, x0 : x0 + tw] += weight[:, :, None] * restored
        den[y0 : y0 + th, x0 : x0 + tw] += weight
    return acc / den[:, :, None]
