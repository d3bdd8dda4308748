"""8-bit PNG codec boundary.

Images cross this boundary exactly once in each direction: decode maps
u8 to float64 in [0, 1] by v / 255, encode maps back by round(255 v)
after clipping. Round-tripping an encoded image is therefore lossless,
and encoding any float image moves each channel by at most 1/510.
"""

from __future__ import annotations

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DimensionError, UnsupportedFormatError


def _open(path):
    try:
        return Image.open(path)
    except UnidentifiedImageError:
        raise UnsupportedFormatError(f"{path}: not a decodable image") from None


def load_image(path):
    """Decode an 8-bit RGB PNG to a float64 [H, W, 3] array in [0, 1]."""
    with _open(path) as img:
        if img.format != "PNG":
            raise UnsupportedFormatError(f"{path}: expected PNG, got {img.format}")
        if img.mode != "RGB":
            raise UnsupportedFormatError(
                f"{path}: expected 8-bit RGB, got mode {img.mode}"
            )
        data = np.asarray(img, dtype=np.float64)
    return data / 255.0


def save_image(path, image):
    """Encode a float [H, W, 3] array in [0, 1] as an 8-bit RGB PNG."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionError(f"expected [H, W, 3], got {arr.shape}")
    quantized = np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(quantized, mode="RGB").save(path, format="PNG")


def load_gray(path):
    """Decode an 8-bit grayscale PNG to a float64 [H, W] array in [0, 1]."""
    with _open(path) as img:
        if img.format != "PNG":
            raise UnsupportedFormatError(f"{path}: expected PNG, got {img.format}")
        if img.mode != "L":
            raise UnsupportedFormatError(
                f"{path}: expected 8-bit grayscale, got mode {img.mode}"
            )
        data = np.asarray(img, dtype=np.float64)
    return data / 255.0


def save_gray(path, image):
    """Encode a float [H, W] array in [0, 1] as an 8-bit grayscale PNG."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"expected [H, W], got {arr.shape}")
    quantized = np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(quantized, mode="L").save(path, format="PNG")
