"""First-order linear recurrence along the last axis.

linear_scan(a, b) computes h_t = a * h_{t-1} + b_t with h_0 = 0, where
``a`` holds one coefficient per channel (constant over time) and ``b`` is
[C, T]. The recurrence is associative, so both directions run as a
Hillis-Steele parallel prefix in log2(T) vectorized passes instead of a
Python loop over T.

Backward rules:
  dL/db_t = sum_{s>=t} a^(s-t) g_s      (the same scan, time-reversed)
  dL/da   = sum_t g_t u_t, with u_t = a u_{t-1} + h_{t-1} (u_0 = 0)
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from .tensor import _make, as_tensor


def _prefix_scan(a_col, b):
    """h_t = a * h_{t-1} + b_t over the last axis, h_0 = 0."""
    coef = np.broadcast_to(a_col, b.shape).copy()
    acc = b.copy()
    t = b.shape[-1]
    d = 1
    while d < t:
        prod = coef[..., d:] * coef[..., :-d]
        acc[..., d:] = acc[..., d:] + coef[..., d:] * acc[..., :-d]
        coef[..., d:] = prod
        d *= 2
    return acc


def linear_scan(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if b.data.ndim != 2 or a.data.shape != (b.data.shape[0],):
        raise DimensionError(
            f"linear_scan: want a=[C] and b=[C,T], got {a.data.shape} and {b.data.shape}"
        )
    a_col = a.data[:, None]
    h = _prefix_scan(a_col, b.data)

    def bwd(g):
        # db: reversed-time scan of the output gradient.
        db = _prefix_scan(a_col, g[..., ::-1])[..., ::-1]
        # da: scan the shifted forward states, then contract with g.
        h_prev = np.zeros_like(h)
        h_prev[..., 1:] = h[..., :-1]
        u = _prefix_scan(a_col, h_prev)
        da = (g * u).sum(axis=-1)
        return (da, np.ascontiguousarray(db))

    return _make(h, (a, b), bwd)
