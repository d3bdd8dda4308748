"""2-D discrete Fourier transforms as differentiable (re, im) pairs.

The forward transform is unnormalized and the inverse carries the full
1/(H*W) factor, so ifft2(fft2(x)) == x. Power-of-two extents run through
an iterative radix-2 kernel vectorized over leading axes; other extents
fall back to an explicit DFT matrix, which is fine at desk scale.

The transforms are linear, so each gradient is again a transform of the
output gradient: for Y = W x, dL/dx = Re(W^T (g_re - i*g_im)) applied
with the same (unconjugated) kernel.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from .tensor import _make, as_tensor

_rev_cache = {}
_dft_cache = {}


def _bit_reverse(n):
    rev = _rev_cache.get(n)
    if rev is None:
        bits = n.bit_length() - 1
        idx = np.arange(n)
        rev = np.zeros(n, dtype=np.intp)
        for b in range(bits):
            rev |= ((idx >> b) & 1) << (bits - 1 - b)
        _rev_cache[n] = rev
    return rev


def _fft_last_axis(z, inverse):
    """Complex transform along the last axis (unnormalized either way)."""
    n = z.shape[-1]
    if n == 1:
        return z.copy()
    sign = 1.0 if inverse else -1.0
    if n & (n - 1) == 0:
        out = z[..., _bit_reverse(n)].copy()
        size = 2
        while size <= n:
            half = size // 2
            tw = np.exp(sign * 2j * np.pi * np.arange(half) / size)
            view = out.reshape(out.shape[:-1] + (n // size, size))
            even = view[..., :half]
            odd = view[..., half:] * tw
            view[..., :half], view[..., half:] = even + odd, even - odd
            size *= 2
        return out
    key = (n, inverse)
    mat = _dft_cache.get(key)
    if mat is None:
        jk = np.outer(np.arange(n), np.arange(n))
        mat = np.exp(sign * 2j * np.pi * jk / n)
        _dft_cache[key] = mat
    return z @ mat


def _fft2_complex(z):
    """Unnormalized forward DFT over the last two axes."""
    z = _fft_last_axis(np.asarray(z, dtype=np.complex128), inverse=False)
    z = _fft_last_axis(np.swapaxes(z, -1, -2), inverse=False)
    return np.swapaxes(z, -1, -2)


def _ifft2_complex(z):
    """Inverse DFT over the last two axes with 1/(H*W) normalization."""
    z = _fft_last_axis(np.asarray(z, dtype=np.complex128), inverse=True)
    z = _fft_last_axis(np.swapaxes(z, -1, -2), inverse=True)
    z = np.swapaxes(z, -1, -2)
    return z / (z.shape[-1] * z.shape[-2])


def fft2(x):
    """Forward transform of a real tensor over its last two axes.

    Returns the (re, im) tensor pair.
    """
    x = as_tensor(x)
    if x.data.ndim < 2:
        raise DimensionError(f"fft2: input must have at least 2 axes, got {x.data.shape}")
    spec = _fft2_complex(x.data)
    re = _make(
        np.ascontiguousarray(spec.real),
        (x,),
        lambda g: (_fft2_complex(g).real.astype(x.data.dtype),),
    )
    im = _make(
        np.ascontiguousarray(spec.imag),
        (x,),
        lambda g: (_fft2_complex(g).imag.astype(x.data.dtype),),
    )
    return re, im


def ifft2(re, im):
    """Inverse transform of an (re, im) spectrum pair over the last two axes.

    Returns the (re, im) pair of the complex result; callers keeping only
    the real part simply drop the second tensor.
    """
    re, im = as_tensor(re), as_tensor(im)
    if re.data.shape != im.data.shape:
        raise DimensionError(
            f"ifft2: re shape {re.data.shape} != im shape {im.data.shape}"
        )
    z = _ifft2_complex(re.data + 1j * im.data)

    def bwd_re(g):
        t = _ifft2_complex(g)
        return (t.real.astype(re.data.dtype), (-t.imag).astype(im.data.dtype))

    def bwd_im(g):
        t = _ifft2_complex(g)
        return (t.imag.astype(re.data.dtype), t.real.astype(im.data.dtype))

    out_re = _make(np.ascontiguousarray(z.real), (re, im), bwd_re)
    out_im = _make(np.ascontiguousarray(z.imag), (re, im), bwd_im)
    return out_re, out_im
