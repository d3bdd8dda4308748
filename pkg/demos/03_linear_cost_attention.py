"""
Attention that scales with pixels, not pixels squared
=====================================================

The attention here is channel-transposed: the score matrix is C x C,
built by summing over pixels, so doubling the pixel count roughly
doubles the cost instead of quadrupling it. That is the property that
makes whole large images tractable. This script times the block at a
fixed channel width while the token count grows.
"""

import time

import numpy as np

from physretinex import engine as E
from physretinex.model import ParamStore, PriorAttention

CHANNELS, HEADS = 32, 4

store = ParamStore(E.Rng(0))
attn = PriorAttention(store, "demo", CHANNELS, HEADS, CHANNELS, "pcmsa")
rng = np.random.default_rng(0)


def median_time(h, w, reps=7):
    x = E.constant(rng.normal(size=(CHANNELS, h, w)))
    prior = E.constant(rng.uniform(size=(CHANNELS, h, w)))
    with E.no_grad():
        attn(x, prior)  # warm up
        times = []
        for _ in range(reps):
            t0 = time.perf_counter()
            attn(x, prior)
            times.append(time.perf_counter() - t0)
    return float(np.median(times))


print(f"{'tokens':>8s} {'ms':>8s} {'x vs prev':>10s}")
prev = None
for h, w in [(32, 64), (64, 64), (64, 128), (128, 128)]:
    t = median_time(h, w)
    ratio = "" if prev is None else f"{t / prev:9.2f}x"
    print(f"{h * w:8d} {t * 1e3:8.2f} {ratio:>10s}")
    prev = t

print("\nper doubling of pixel count the time roughly doubles;")
print("token-transposed attention would show ~4x per row instead")
