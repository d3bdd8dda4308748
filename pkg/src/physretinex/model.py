"""Restoration model: decompose, correct per branch, recombine.

The degraded image is split into reflectance and illumination by a small
predictor (the product reconstructs the clamped input exactly by
construction). A prior-modulated attention U-net corrects reflectance, a
lightweight Fourier stack corrects illumination, and the corrected pair
is recombined multiplicatively at three scales for deep supervision.

All correction heads, gates, and fusion mixers start at zero, so a fresh
model is the identity map on the clamped input. That property anchors
several tests and makes training a pure residual-learning problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import engine as E
from . import priors
from .errors import ConfigurationError, ContractError, DimensionError

ILLUM_FLOOR = 1e-3
SIGMA_FLOOR = 1e-4

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T
GRAY_R, GRAY_G, GRAY_B = priors.GRAY_WEIGHTS

TASKS = ("derain", "lowlight", "dehaze", "deshadow")
INJECTION_MODES = ("pcmsa", "concat", "none")


# ---------------------------------------------------------------------------
# parameter management

class ParamStore:
    """Registry of named Parameters with seeded initialization."""

    def __init__(self, rng):
        self.rng = rng
        self.params = {}

    def param(self, name, shape, init="zeros", fan_in=None):
        if name in self.params:
            raise ContractError(f"duplicate parameter name {name!r}")
        shape = tuple(shape)
        if init == "zeros":
            data = np.zeros(shape)
        elif init == "ones":
            data = np.ones(shape)
        elif init == "he":
            data = self.rng.randn(shape) * np.sqrt(2.0 / fan_in)
        elif init == "linear":
            data = self.rng.randn(shape) * np.sqrt(1.0 / fan_in)
        elif isinstance(init, (int, float)):
            data = np.full(shape, float(init))
        else:
            raise ConfigurationError(f"unknown init {init!r}")
        p = E.Parameter(name, data)
        self.params[name] = p
        return p

    def ordered(self):
        return list(self.params.values())

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def total_count(self):
        return sum(p.data.size for p in self.params.values())

    def component_counts(self):
        counts = {}
        for name, p in self.params.items():
            head = name.split(".", 1)[0]
            counts[head] = counts.get(head, 0) + p.data.size
        return counts

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_dict(self, state):
        missing = sorted(set(self.params) - set(state))
        extra = sorted(set(state) - set(self.params))
        if missing or extra:
            raise ConfigurationError(
                f"parameter names do not match model: missing {missing}, unexpected {extra}"
            )
        for name, p in self.params.items():
            arr = np.asarray(state[name])
            if arr.shape != p.data.shape:
                raise DimensionError(
                    f"parameter {name}: checkpoint shape {arr.shape} != model shape {p.data.shape}"
                )
            p.data = arr.astype(p.data.dtype, copy=True)


class Conv2d:
    def __init__(self, store, name, c_in, c_out, k, stride=1, padding=None,
                 groups=1, bias=True, zero=False):
        self.stride = stride
        self.padding = k // 2 if padding is None else padding
        self.groups = groups
        fan_in = (c_in // groups) * k * k
        self.w = store.param(
            f"{name}.w", (c_out, c_in // groups, k, k),
            init="zeros" if zero else "he", fan_in=fan_in,
        )
        self.b = store.param(f"{name}.b", (c_out,)) if bias else None

    def __call__(self, x):
        return E.conv2d(x, self.w, self.b, stride=self.stride,
                        padding=self.padding, groups=self.groups)


class Linear:
    def __init__(self, store, name, d_in, d_out, bias=False, zero=False):
        self.w = store.param(
            f"{name}.w", (d_out, d_in),
            init="zeros" if zero else "linear", fan_in=d_in,
        )
        self.b = store.param(f"{name}.b", (d_out,)) if bias else None

    def __call__(self, x):
        y = E.matmul(x, E.transpose(self.w, (1, 0)))
        return E.add(y, self.b) if self.b is not None else y


# ---------------------------------------------------------------------------
# configuration

@dataclass
class ModelConfig:
    task: str = "lowlight"
    base_width: int = 16
    heads: int = 4
    samb_blocks_per_level: int = 2
    fia_width: int = 8
    prior_width: int = 8
    injection_mode: str = "pcmsa"
    dual_branch: bool = True
    theta: float = 0.0
    rain_alpha: float = 5.0
    struct_scales: tuple = (1.0,)

    def validate(self):
        if self.task not in TASKS:
            raise ConfigurationError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.injection_mode not in INJECTION_MODES:
            raise ConfigurationError(
                f"injection_mode must be one of {INJECTION_MODES}, got {self.injection_mode!r}"
            )
        for fname in ("base_width", "heads", "samb_blocks_per_level", "fia_width", "prior_width"):
            if getattr(self, fname) < 1:
                raise ConfigurationError(f"{fname} must be >= 1")
        if self.base_width % self.heads:
            raise ConfigurationError(
                f"heads={self.heads} must divide base_width={self.base_width}"
            )
        if self.dual_branch and self.fia_width % self.heads:
            raise ConfigurationError(
                f"heads={self.heads} must divide fia_width={self.fia_width}"
            )
        if self.injection_mode != "none":
            if self.base_width % self.prior_width:
                raise ConfigurationError(
                    f"prior_width={self.prior_width} must divide base_width={self.base_width}"
                )
            if self.dual_branch and self.fia_width % self.prior_width:
                raise ConfigurationError(
                    f"prior_width={self.prior_width} must divide fia_width={self.fia_width}"
                )
        if self.rain_alpha <= 0:
            raise ConfigurationError(f"rain_alpha must be positive, got {self.rain_alpha}")
        if not self.struct_scales or any(s <= 0 for s in self.struct_scales):
            raise ConfigurationError(f"struct_scales must be positive, got {self.struct_scales}")
        return self


# ---------------------------------------------------------------------------
# building blocks

class PriorAttention:
    """Channel-transposed attention with prior-modulated values.

    Tokens are pixels, attention runs across channels, so cost is linear
    in H*W. The value matrix is modulated by the prior map (elementwise
    product, or concat + projection in the ablation mode), per-head
    logits are rescaled by a learnable sigma with a magnitude floor, and
    a depthwise convolution of V adds positional structure before the
    output projection.
    """

    def __init__(self, store, name, channels, heads, prior_width, injection):
        if channels % heads:
            raise ConfigurationError(f"heads={heads} must divide channels={channels}")
        if injection != "none" and channels % prior_width:
            raise ConfigurationError(
                f"prior_width={prior_width} must divide channels={channels}"
            )
        self.channels = channels
        self.heads = heads
        self.prior_width = prior_width
        self.injection = injection
        self.wq = Linear(store, f"{name}.wq", channels, channels)
        self.wk = Linear(store, f"{name}.wk", channels, channels)
        self.wv = Linear(store, f"{name}.wv", channels, channels)
        self.sigma = store.param(f"{name}.sigma", (heads,), init="ones")
        self.pos = Conv2d(store, f"{name}.pos", channels, channels, 3, groups=channels)
        self.proj = Conv2d(store, f"{name}.proj", channels, channels, 1)
        if injection == "concat":
            self.inject = Linear(store, f"{name}.inject", 2 * channels, channels)

    def __call__(self, x, prior=None):
        c, h, w = x.shape
        if c != self.channels:
            raise DimensionError(f"attention built for {self.channels} channels, got {c}")
        hw = h * w
        seq = E.reshape(E.transpose(x, (1, 2, 0)), (hw, c))
        q = self.wq(seq)
        k = self.wk(seq)
        v = self.wv(seq)

        if self.injection == "none":
            v_mod = v
        else:
            if prior is None:
                raise ContractError("injection mode requires a prior map")
            if prior.shape[1:] != (h, w):
                raise DimensionError(
                    f"prior extents {prior.shape[1:]} do not match features ({h},{w})"
                )
            pm = E.reshape(E.transpose(prior, (1, 2, 0)), (hw, prior.shape[0]))
            rep = c // prior.shape[0]
            pm_full = E.concat([pm] * rep, axis=1) if rep > 1 else pm
            if self.injection == "pcmsa":
                v_mod = E.mul(v, pm_full)
            else:
                v_mod = self.inject(E.concat([v, pm_full], axis=1))

        d = c // self.heads
        head_outs = []
        for i in range(self.heads):
            qs = E.narrow(q, 1, i * d, d)
            ks = E.narrow(k, 1, i * d, d)
            vs = E.narrow(v_mod, 1, i * d, d)
            sig = E.clamp_magnitude(E.narrow(self.sigma, 0, i, 1), SIGMA_FLOOR)
            scores = E.div(E.matmul(E.transpose(ks, (1, 0)), qs), sig)
            att = E.softmax(scores, axis=1)
            head_outs.append(E.matmul(att, E.transpose(vs, (1, 0))))
        attn = E.reshape(E.concat(head_outs, axis=0), (c, h, w))

        v_spatial = E.transpose(E.reshape(v, (h, w, c)), (2, 0, 1))
        return self.proj(E.add(attn, self.pos(v_spatial)))


class ScaleAttentiveBlock:
    """Multi-scale attentive correction with a state-space context scan.

    Attention runs at full, half, and quarter scale (prior pooled along),
    each followed by a depthwise convolution and upsampled back. A
    per-channel first-order recurrence over the row-major pixel sequence
    supplies long-range context. A zero-initialized 1x1 fusion makes the
    block an exact residual identity at init.
    """

    def __init__(self, store, name, channels, heads, prior_width, injection):
        self.attn = [
            PriorAttention(store, f"{name}.attn{i}", channels, heads, prior_width, injection)
            for i in range(3)
        ]
        self.dw = [
            Conv2d(store, f"{name}.dw{i}", channels, channels, 3, groups=channels)
            for i in range(3)
        ]
        self.lam = store.param(f"{name}.lam", (channels,))
        self.fuse = Conv2d(store, f"{name}.fuse", 4 * channels, channels, 1, zero=True)

    def __call__(self, f, prior=None):
        c, h, w = f.shape
        feats = []
        cur_f, cur_p = f, prior
        for i in range(3):
            y = self.dw[i](self.attn[i](cur_f, cur_p))
            if i:
                y = E.bilinear_resize(y, (h, w))
            feats.append(y)
            if i < 2:
                cur_f = E.avg_pool2(cur_f)
                cur_p = E.avg_pool2(cur_p) if cur_p is not None else None
        a = E.sigmoid(self.lam)
        drive = E.mul(E.reshape(E.sub(1.0, a), (c, 1)), E.reshape(f, (c, h * w)))
        ctx = E.add(f, E.reshape(E.linear_scan(a, drive), (c, h, w)))
        feats.append(ctx)
        return E.add(f, self.fuse(E.concat(feats, axis=0)))


class FourierCorrectionBlock:
    """Spectral correction: separate residual stacks on amplitude and
    phase of the attended features, recombined and gated per channel.
    Gate and stack tails start at zero, so the block is the identity at
    init."""

    def __init__(self, store, name, channels, heads, prior_width, injection):
        self.channels = channels
        self.attn = PriorAttention(store, f"{name}.attn", channels, heads, prior_width, injection)
        self.amp_in = Conv2d(store, f"{name}.amp_in", channels, channels, 1)
        self.amp_out = Conv2d(store, f"{name}.amp_out", channels, channels, 1, zero=True)
        self.ph_in = Conv2d(store, f"{name}.ph_in", channels, channels, 1)
        self.ph_out = Conv2d(store, f"{name}.ph_out", channels, channels, 1, zero=True)
        self.gate = store.param(f"{name}.gate", (channels,))

    def __call__(self, f, prior=None):
        attended = self.attn(f, prior)
        re, im = E.fft2(attended)
        # Tiny bias keeps the magnitude gradient finite on empty bins.
        amp = E.sqrt(E.add(E.add(E.mul(re, re), E.mul(im, im)), 1e-24))
        phase = E.atan2(im, re)
        amp2 = E.add(amp, self.amp_out(E.relu(self.amp_in(amp))))
        phase2 = E.add(phase, self.ph_out(E.relu(self.ph_in(phase))))
        re2 = E.mul(amp2, E.cos(phase2))
        im2 = E.mul(amp2, E.sin(phase2))
        corr, _ = E.ifft2(re2, im2)
        gate = E.reshape(self.gate, (self.channels, 1, 1))
        return E.add(f, E.mul(gate, corr))


class RainMaskNet:
    """Small U-net (widths 8/16/32) predicting the rain mask from the
    degraded image alone; final layer starts at zero so the initial
    prediction is the uninformative 0.5 map."""

    def __init__(self, store, name, widths=(8, 16, 32)):
        w0, w1, w2 = widths
        self.e0a = Conv2d(store, f"{name}.e0a", 3, w0, 3)
        self.e0b = Conv2d(store, f"{name}.e0b", w0, w0, 3)
        self.down0 = Conv2d(store, f"{name}.down0", w0, w1, 3, stride=2)
        self.e1 = Conv2d(store, f"{name}.e1", w1, w1, 3)
        self.down1 = Conv2d(store, f"{name}.down1", w1, w2, 3, stride=2)
        self.e2 = Conv2d(store, f"{name}.e2", w2, w2, 3)
        self.up1 = Conv2d(store, f"{name}.up1", w2, w1, 1)
        self.fuse1 = Conv2d(store, f"{name}.fuse1", 2 * w1, w1, 3)
        self.up0 = Conv2d(store, f"{name}.up0", w1, w0, 1)
        self.fuse0 = Conv2d(store, f"{name}.fuse0", 2 * w0, w0, 3)
        self.out = Conv2d(store, f"{name}.out", w0, 1, 3, zero=True)

    def __call__(self, img):
        a = E.relu(self.e0b(E.relu(self.e0a(img))))
        b = E.relu(self.e1(E.relu(self.down0(a))))
        c = E.relu(self.e2(E.relu(self.down1(b))))
        u1 = self.up1(E.bilinear_resize(c, b.shape[1:]))
        m = E.relu(self.fuse1(E.concat([u1, b], axis=0)))
        u0 = self.up0(E.bilinear_resize(m, a.shape[1:]))
        m = E.relu(self.fuse0(E.concat([u0, a], axis=0)))
        return E.sigmoid(self.out(m))


class Decomposer:
    """Predicts illumination bounded to [1e-3, 1]; reflectance is the
    clamped image divided by it, so their product reconstructs the
    clamped input exactly regardless of the weights."""

    def __init__(self, store, name, width):
        self.c1 = Conv2d(store, f"{name}.c1", 3, width, 3)
        self.c2 = Conv2d(store, f"{name}.c2", width, width, 3)
        self.c3 = Conv2d(store, f"{name}.c3", width, 3, 3)

    def __call__(self, img):
        l_raw = self.c3(E.relu(self.c2(E.relu(self.c1(img)))))
        l_eff = E.add(ILLUM_FLOOR, E.mul(1.0 - ILLUM_FLOOR, E.sigmoid(l_raw)))
        r_eff = E.div(E.clip(img, ILLUM_FLOOR, 1.0), l_eff)
        return r_eff, l_eff


class PriorFusion:
    """Fuses image gradients (fixed Sobel on luminance) with the prior map.

    Both are lifted by 1x1 convolutions, concatenated, and mixed by a
    zero-initialized 3x3 convolution; the modulation map is 1 + tanh of
    the mix, so it lies in (0, 2) and equals exactly 1 at init. Level
    maps are produced by repeated 2x2 average pooling.
    """

    def __init__(self, store, name, width):
        self.width = width
        self.lift_grad = Conv2d(store, f"{name}.lift_grad", 2, width, 1)
        self.lift_prior = Conv2d(store, f"{name}.lift_prior", 1, width, 1)
        self.mix = Conv2d(store, f"{name}.mix", 2 * width, width, 3, zero=True)
        self.sobel = E.constant(np.stack([SOBEL_X, SOBEL_Y])[:, None, :, :])

    def __call__(self, img, prior, n_levels=3):
        r = E.narrow(img, 0, 0, 1)
        g = E.narrow(img, 0, 1, 1)
        b = E.narrow(img, 0, 2, 1)
        lum = E.add(E.add(E.mul(GRAY_R, r), E.mul(GRAY_G, g)), E.mul(GRAY_B, b))
        edges = E.conv2d(lum, self.sobel, padding=1)
        lifted = E.concat([self.lift_grad(edges), self.lift_prior(prior)], axis=0)
        p = E.add(1.0, E.tanh(self.mix(lifted)))
        levels = [p]
        for _ in range(n_levels - 1):
            levels.append(E.avg_pool2(levels[-1]))
        return levels


class ReflectanceBranch:
    """3-level U-shape of scale-attentive blocks (widths C, 2C, 4C) with
    strided-conv downsampling, bilinear-up + 1x1 skip fusion, and a
    zero-initialized 3-channel correction head at every decoder level."""

    def __init__(self, store, name, cfg):
        c = cfg.base_width
        n = cfg.samb_blocks_per_level
        args = (cfg.heads, cfg.prior_width, cfg.injection_mode)

        def blocks(tag, width):
            return [
                ScaleAttentiveBlock(store, f"{name}.{tag}{i}", width, *args)
                for i in range(n)
            ]

        self.stem = Conv2d(store, f"{name}.stem", 3, c, 3)
        self.enc0 = blocks("enc0_", c)
        self.down0 = Conv2d(store, f"{name}.down0", c, 2 * c, 3, stride=2)
        self.enc1 = blocks("enc1_", 2 * c)
        self.down1 = Conv2d(store, f"{name}.down1", 2 * c, 4 * c, 3, stride=2)
        self.enc2 = blocks("enc2_", 4 * c)
        self.up1 = Conv2d(store, f"{name}.up1", 4 * c, 2 * c, 1)
        self.fuse1 = Conv2d(store, f"{name}.fuse1", 4 * c, 2 * c, 1)
        self.dec1 = blocks("dec1_", 2 * c)
        self.up0 = Conv2d(store, f"{name}.up0", 2 * c, c, 1)
        self.fuse0 = Conv2d(store, f"{name}.fuse0", 2 * c, c, 1)
        self.dec0 = blocks("dec0_", c)
        self.head_coarse = Conv2d(store, f"{name}.head_coarse", 4 * c, 3, 3, zero=True)
        self.head_mid = Conv2d(store, f"{name}.head_mid", 2 * c, 3, 3, zero=True)
        self.head_fine = Conv2d(store, f"{name}.head_fine", c, 3, 3, zero=True)

    def __call__(self, x, p_levels):
        p0, p1, p2 = p_levels if p_levels is not None else (None, None, None)
        e0 = self.stem(x)
        for blk in self.enc0:
            e0 = blk(e0, p0)
        e1 = self.down0(e0)
        for blk in self.enc1:
            e1 = blk(e1, p1)
        e2 = self.down1(e1)
        for blk in self.enc2:
            e2 = blk(e2, p2)
        s_coarse = self.head_coarse(e2)
        d1 = self.fuse1(E.concat([self.up1(E.bilinear_resize(e2, e1.shape[1:])), e1], axis=0))
        for blk in self.dec1:
            d1 = blk(d1, p1)
        s_mid = self.head_mid(d1)
        d0 = self.fuse0(E.concat([self.up0(E.bilinear_resize(d1, e0.shape[1:])), e0], axis=0))
        for blk in self.dec0:
            d0 = blk(d0, p0)
        s_fine = self.head_fine(d0)
        return s_coarse, s_mid, s_fine


class IlluminationBranch:
    """Mirrored lightweight stack of Fourier correction blocks at a
    constant small width, emitting illumination corrections at the same
    three scales."""

    def __init__(self, store, name, cfg):
        f = cfg.fia_width
        args = (cfg.heads, cfg.prior_width, cfg.injection_mode)
        self.stem = Conv2d(store, f"{name}.stem", 3, f, 3)
        self.enc0 = FourierCorrectionBlock(store, f"{name}.enc0", f, *args)
        self.down0 = Conv2d(store, f"{name}.down0", f, f, 3, stride=2)
        self.enc1 = FourierCorrectionBlock(store, f"{name}.enc1", f, *args)
        self.down1 = Conv2d(store, f"{name}.down1", f, f, 3, stride=2)
        self.enc2 = FourierCorrectionBlock(store, f"{name}.enc2", f, *args)
        self.up1 = Conv2d(store, f"{name}.up1", f, f, 1)
        self.fuse1 = Conv2d(store, f"{name}.fuse1", 2 * f, f, 1)
        self.dec1 = FourierCorrectionBlock(store, f"{name}.dec1", f, *args)
        self.up0 = Conv2d(store, f"{name}.up0", f, f, 1)
        self.fuse0 = Conv2d(store, f"{name}.fuse0", 2 * f, f, 1)
        self.dec0 = FourierCorrectionBlock(store, f"{name}.dec0", f, *args)
        self.head_coarse = Conv2d(store, f"{name}.head_coarse", f, 3, 3, zero=True)
        self.head_mid = Conv2d(store, f"{name}.head_mid", f, 3, 3, zero=True)
        self.head_fine = Conv2d(store, f"{name}.head_fine", f, 3, 3, zero=True)

    def __call__(self, x, p_levels):
        p0, p1, p2 = p_levels if p_levels is not None else (None, None, None)
        e0 = self.enc0(self.stem(x), p0)
        e1 = self.enc1(self.down0(e0), p1)
        e2 = self.enc2(self.down1(e1), p2)
        f_coarse = self.head_coarse(e2)
        d1 = self.fuse1(E.concat([self.up1(E.bilinear_resize(e2, e1.shape[1:])), e1], axis=0))
        d1 = self.dec1(d1, p1)
        f_mid = self.head_mid(d1)
        d0 = self.fuse0(E.concat([self.up0(E.bilinear_resize(d1, e0.shape[1:])), e0], axis=0))
        d0 = self.dec0(d0, p0)
        f_fine = self.head_fine(d0)
        return f_coarse, f_mid, f_fine


# ---------------------------------------------------------------------------
# full model

def _to_chw(image):
    if isinstance(image, E.Tensor):
        t = image
        if t.data.ndim != 3 or t.data.shape[0] != 3:
            raise DimensionError(f"expected [3,H,W] tensor, got {t.data.shape}")
        return t
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionError(f"expected [H,W,3] image, got {arr.shape}")
    return E.constant(np.ascontiguousarray(arr.transpose(2, 0, 1)))


def _prior_to_tensor(prior):
    if prior is None:
        return None
    if isinstance(prior, E.Tensor):
        t = prior
        if t.data.ndim == 2:
            return E.reshape(t, (1,) + t.data.shape)
        if t.data.ndim == 3 and t.data.shape[0] == 1:
            return t
        raise DimensionError(f"prior must be [H,W] or [1,H,W], got {t.data.shape}")
    arr = np.asarray(prior, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"prior must be [H,W], got {arr.shape}")
    return E.constant(arr[None])


class RestorationModel:
    """Aggregates the decomposer, prior fusion, and both correction
    branches, plus the task-specific prior machinery (learnable shadow
    angle, rain mask predictor)."""

    def __init__(self, config, seed=0):
        config.validate()
        self.config = config
        self.store = ParamStore(E.Rng(seed))
        if config.dual_branch:
            self.decomposer = Decomposer(self.store, "decomposer", config.base_width)
            self.illumination = IlluminationBranch(self.store, "illumination", config)
        else:
            self.decomposer = None
            self.illumination = None
        self.fusion = (
            PriorFusion(self.store, "fusion", config.prior_width)
            if config.injection_mode != "none"
            else None
        )
        self.reflectance = ReflectanceBranch(self.store, "reflectance", config)
        self.rain_net = (
            RainMaskNet(self.store, "rain_net") if config.task == "derain" else None
        )
        self.theta = (
            self.store.param("prior_angle.theta", (), init=config.theta)
            if config.task == "deshadow"
            else None
        )

    # -- parameters ---------------------------------------------------

    def parameters(self):
        return self.store.ordered()

    def trainable_parameters(self):
        """Parameters updated by the main objective (the rain predictor
        trains against its own mask loss)."""
        return [p for p in self.store.ordered() if not p.name.startswith("rain_net.")]

    def rain_parameters(self):
        return [p for p in self.store.ordered() if p.name.startswith("rain_net.")]

    def parameter_count(self):
        return self.store.total_count()

    def component_counts(self):
        return self.store.component_counts()

    # -- priors ---------------------------------------------------------

    def compute_prior(self, image, clean=None, on_tape=False):
        """Prior map for ``image`` per the configured task.

        ``clean`` enables the ground-truth rain mask during training;
        ``on_tape`` returns a Tensor wired to the learnable pieces (the
        shadow angle, the rain predictor) instead of a numpy map.
        """
        cfg = self.config
        if cfg.injection_mode == "none":
            return None
        if cfg.task == "dehaze":
            return priors.dark_channel(image)
        if cfg.task == "lowlight":
            return priors.structure_prior(image, cfg.struct_scales)
        if cfg.task == "deshadow":
            if on_tape:
                return priors.shadow_projection_tape(image, self.theta)
            return priors.shadow_prior(image, float(self.theta.data))
        # derain
        if clean is not None and not on_tape:
            return priors.rain_mask_gt(image, clean, cfg.rain_alpha)
        if on_tape:
            return self.rain_net(_to_chw(image))
        with E.no_grad():
            mask = self.rain_net(_to_chw(image))
        return mask.data[0]

    # -- forward ----------------------------------------------------------

    def decompose(self, image):
        if self.decomposer is None:
            raise ConfigurationError("decompose requires dual_branch=true")
        return self.decomposer(_to_chw(image))

    def forward(self, image, prior=None):
        """Run the restoration pipeline.

        Returns the three supervision outputs as [3, H/4, W/4],
        [3, H/2, W/2], [3, H, W] tensors (coarse to fine).
        """
        img = _to_chw(image)
        _, h, w = img.shape
        if h % 4 or w % 4:
            raise ConfigurationError(
                f"input extents ({h},{w}) must be divisible by 4; "
                "reflective-pad the image and crop the result"
            )
        prior_t = _prior_to_tensor(prior)
        if self.fusion is not None:
            if prior_t is None:
                raise ContractError("configured injection mode requires a prior map")
            p_levels = self.fusion(img, prior_t)
        else:
            p_levels = None

        if self.config.dual_branch:
            r_eff, l_eff = self.decomposer(img)
            s_hats = self.reflectance(r_eff, p_levels)
            f_hats = self.illumination(l_eff, p_levels)
            outputs = []
            r_l, l_l = r_eff, l_eff
            pooled = []
            for _ in range(3):
                pooled.append((r_l, l_l))
                r_l, l_l = E.avg_pool2(r_l), E.avg_pool2(l_l)
            # pooled[0] is full resolution; outputs go coarse to fine.
            for level in range(3):
                r_l, l_l = pooled[2 - level]
                out = E.mul(E.add(r_l, s_hats[level]), E.add(l_l, f_hats[level]))
                outputs.append(out)
            return tuple(outputs)

        base = E.clip(img, ILLUM_FLOOR, 1.0)
        s_hats = self.reflectance(base, p_levels)
        levels = [base, E.avg_pool2(base)]
        levels.append(E.avg_pool2(levels[-1]))
        return tuple(E.add(levels[2 - i], s_hats[i]) for i in range(3))

    def restore(self, image, prior=None):
        """Inference convenience: prior extraction (unless given), full
        forward without graph construction, finest output as a clipped
        [H, W, 3] numpy image."""
        with E.no_grad():
            if prior is None:
                prior = self.compute_prior(image)
            outputs = self.forward(image, prior)
        fine = outputs[2].data
        return np.clip(fine.transpose(1, 2, 0), 0.0, 1.0)
