"""Objective and metric checks: exactness identities, independent
window-loop SSIM oracle, spectral loss closed forms, composition of the
multi-level objective, and gradient checks."""

import math

import numpy as np
import pytest

from helpers import check_grad
from physretinex import engine as E
from physretinex.errors import ConfigurationError, DimensionError
from physretinex.losses import (
    LossWeights,
    build_target_pyramid,
    charbonnier,
    fft_loss,
    gaussian_window,
    psnr,
    ssim,
    total_loss,
)


def test_charbonnier_equal_inputs_is_exactly_epsilon():
    x = np.random.default_rng(0).uniform(size=(4, 4))  # 16 = 2^4 elements
    assert charbonnier(E.constant(x), E.constant(x)).item() == 1e-3


def test_charbonnier_hand_value():
    x = E.constant(np.zeros((2, 2)))
    y = E.constant(np.full((2, 2), 3e-3))
    expect = math.sqrt(9e-6 + 1e-6)
    assert abs(charbonnier(x, y).item() - expect) < 1e-15
    with pytest.raises(DimensionError):
        charbonnier(x, E.constant(np.zeros(3)))


def test_gaussian_window_normalized_and_validated():
    w = gaussian_window(11, 1.5)
    assert w.shape == (11, 11)
    assert abs(w.sum() - 1.0) < 1e-12
    assert np.abs(w - w.T).max() < 1e-15
    with pytest.raises(ConfigurationError):
        gaussian_window(10)


def test_ssim_identical_inputs_is_one():
    x = np.random.default_rng(1).uniform(size=(3, 16, 16))
    assert abs(ssim(E.constant(x), E.constant(x)).item() - 1.0) < 1e-9


def _ssim_loop_oracle(x, y, window=11, sigma=1.5):
    """Independent SSIM: explicit loops over valid windows."""
    w = gaussian_window(window, sigma)
    c1, c2 = 0.01**2, 0.03**2
    c, h, wid = x.shape
    vals = []
    for ch in range(c):
        for i in range(h - window + 1):
            for j in range(wid - window + 1):
                px = x[ch, i : i + window, j : j + window]
                py = y[ch, i : i + window, j : j + window]
                mx, my = (w * px).sum(), (w * py).sum()
                vx = (w * px * px).sum() - mx * mx
                vy = (w * py * py).sum() - my * my
                cov = (w * px * py).sum() - mx * my
                vals.append(
                    ((2 * mx * my + c1) * (2 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2))
                )
    return float(np.mean(vals))


def test_ssim_matches_window_loop_oracle():
    rng = np.random.default_rng(2)
    x = rng.uniform(size=(2, 14, 13))
    y = np.clip(x + 0.1 * rng.standard_normal(x.shape), 0, 1)
    got = ssim(E.constant(x), E.constant(y)).item()
    assert abs(got - _ssim_loop_oracle(x, y)) < 1e-9


def test_ssim_anticorrelated_checkerboard_is_negative():
    yy, xx = np.meshgrid(np.arange(16), np.arange(16), indexing="ij")
    board = ((yy + xx) % 2).astype(np.float64)
    s = ssim(E.constant(board[None]), E.constant(1.0 - board[None])).item()
    assert s < 0.0


def test_ssim_validates_window_fit_and_shapes():
    x = E.constant(np.zeros((1, 8, 8)))
    with pytest.raises(ConfigurationError):
        ssim(x, x, window=11)
    with pytest.raises(DimensionError):
        ssim(x, E.constant(np.zeros((1, 9, 9))))


def test_fft_loss_zero_on_equal_and_dc_shift_hand_value():
    x = np.random.default_rng(3).uniform(size=(1, 8, 8))
    assert fft_loss(E.constant(x), E.constant(x)).item() == 0.0
    # constant shift c lands entirely in the DC bin: |delta| = HW*c,
    # normalized by 2*HW -> c/2
    c = 0.25
    got = fft_loss(E.constant(x), E.constant(x + c)).item()
    assert abs(got - c / 2.0) < 1e-12


def test_total_loss_composes_weighted_terms():
    rng = np.random.default_rng(4)
    outs = [E.constant(rng.uniform(size=(3, 16, 16))) for _ in range(3)]
    tgts = [E.constant(rng.uniform(size=(3, 16, 16))) for _ in range(3)]
    weights = LossWeights()
    total, terms = total_loss(outs, tgts, weights, ssim_window=11, return_terms=True)
    expect = 0.0
    for w, o, t in zip((0.25, 0.5, 1.0), outs, tgts):
        cb = charbonnier(o, t).item()
        ds = 1.0 - ssim(o, t).item()
        sp = fft_loss(o, t).item()
        expect += w * (cb + 0.5 * ds + 1e-4 * sp)
    assert abs(total.item() - expect) < 1e-12
    assert len(terms) == 3 and set(terms[0]) == {"charbonnier", "dssim", "fft"}


def test_total_loss_perceptual_hook_slot():
    rng = np.random.default_rng(5)
    outs = [E.constant(rng.uniform(size=(1, 8, 8))) for _ in range(3)]
    tgts = [E.constant(rng.uniform(size=(1, 8, 8))) for _ in range(3)]
    base = total_loss(outs, tgts, ssim_window=5).item()
    hooked = total_loss(
        outs, tgts, ssim_window=5, perceptual_hook=lambda o, t: charbonnier(o, t)
    ).item()
    extra = sum(
        w * 0.5 * charbonnier(o, t).item()
        for w, o, t in zip((0.25, 0.5, 1.0), outs, tgts)
    )
    assert abs(hooked - (base + extra)) < 1e-12


def test_total_loss_validates_levels():
    x = [E.constant(np.zeros((1, 8, 8)))] * 2
    with pytest.raises(ConfigurationError):
        total_loss(x, x + x[:1])
    with pytest.raises(DimensionError):
        total_loss(
            [E.constant(np.zeros((1, 8, 8)))] * 3,
            [E.constant(np.zeros((1, 6, 6)))] * 3,
            ssim_window=5,
        )


def test_build_target_pyramid_shapes_and_pooling():
    clean = np.random.default_rng(6).uniform(size=(3, 16, 16))
    coarse, mid, fine = build_target_pyramid(clean)
    assert fine.data.shape == (3, 16, 16)
    assert mid.data.shape == (3, 8, 8)
    assert coarse.data.shape == (3, 4, 4)
    assert abs(mid.data[0, 0, 0] - clean[0, :2, :2].mean()) < 1e-12


def test_psnr_sentinel_and_twenty_db():
    x = np.random.default_rng(7).uniform(size=(8, 8))
    assert psnr(x, x) == math.inf
    assert abs(psnr(x, x + 0.1) - 20.0) < 1e-6
    assert abs(psnr(np.zeros(4), np.full(4, 0.5)) - 10 * math.log10(1 / 0.25)) < 1e-12
    with pytest.raises(DimensionError):
        psnr(x, np.zeros(3))


def test_loss_gradients():
    check_grad(
        lambda ts: charbonnier(ts[0], ts[1]), [(3, 4, 4), (3, 4, 4)], seeds=range(3)
    )
    check_grad(
        lambda ts: ssim(ts[0], ts[1], window=5),
        [(1, 8, 8), (1, 8, 8)],
        seeds=range(3),
        sampler=lambda rng, s: rng.uniform(0.1, 0.9, size=s),
    )
    check_grad(
        lambda ts: fft_loss(ts[0], ts[1]), [(1, 4, 4), (1, 4, 4)], seeds=range(3)
    )

    def tl(ts):
        outs, tgts = ts[:3], ts[3:]
        return total_loss(outs, tgts, ssim_window=5)

    check_grad(
        tl,
        [(1, 8, 8)] * 6,
        seeds=range(2),
        sampler=lambda rng, s: rng.uniform(0.1, 0.9, size=s),
    )
