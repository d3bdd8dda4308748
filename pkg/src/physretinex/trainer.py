"""Training loop: AdamW with decoupled weight decay, cosine learning
rate, deterministic patch sampling, and resumable checkpoints.

Everything is seeded through the engine RNG, so two runs with the same
configuration produce bit-identical checkpoints, and a resumed run
continues the exact arithmetic of an uninterrupted one (optimizer
moments, step counter, and sampler state all live in the checkpoint).
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from . import engine as E
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import ConfigurationError, ContractError, DatasetError
from .losses import LossWeights, build_target_pyramid, charbonnier, total_loss
from .model import RestorationModel
from .priors import rain_mask_gt

log = logging.getLogger("physretinex")


@dataclass
class TrainConfig:
    lr_init: float = 2e-5
    lr_final: float = 1e-7
    total_steps: int = 1000
    batch_size: int = 2
    patch: int = 64
    seed: int = 0
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    hflip: bool = True
    checkpoint_every: int = 0
    ssim_window: int = 11

    def validate(self):
        if self.lr_init <= 0 or self.lr_final <= 0 or self.lr_final > self.lr_init:
            raise ConfigurationError(
                f"need 0 < lr_final <= lr_init, got {self.lr_final} and {self.lr_init}"
            )
        if self.total_steps < 1:
            raise ConfigurationError(f"total_steps must be >= 1, got {self.total_steps}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patch < 4 or self.patch % 4:
            raise ConfigurationError(f"patch must be a positive multiple of 4, got {self.patch}")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ConfigurationError(f"betas must lie in [0,1), got {self.beta1}, {self.beta2}")
        if self.weight_decay < 0 or self.adam_eps <= 0:
            raise ConfigurationError("weight_decay must be >= 0 and adam_eps > 0")
        return self


def lr_at(step, config):
    """Cosine schedule from lr_init to lr_final over total_steps.

    Endpoints are returned exactly; intermediate steps follow
    lr_final + (lr_init - lr_final) * (1 + cos(pi * step / total)) / 2.
    """
    if step < 0 or step > config.total_steps:
        raise ContractError(f"step {step} outside [0, {config.total_steps}]")
    if step == 0:
        return config.lr_init
    if step == config.total_steps:
        return config.lr_final
    frac = (1.0 + math.cos(math.pi * step / config.total_steps)) / 2.0
    return config.lr_final + (config.lr_init - config.lr_final) * frac


class AdamW:
    """Adam with decoupled weight decay:

        m <- b1 m + (1-b1) g          v <- b2 v + (1-b2) g^2
        p <- p - lr (m_hat / (sqrt(v_hat) + eps) + wd p)

    with the usual 1/(1-b^t) bias corrections, t counted from 1.
    """

    def __init__(self, params, config):
        self.params = list(params)
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ContractError("optimizer parameters must have unique names")
        self.config = config
        self.step_count = 0
        self.m = {p.name: np.zeros_like(p.data) for p in self.params}
        self.v = {p.name: np.zeros_like(p.data) for p in self.params}

    def step(self, lr):
        cfg = self.config
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - cfg.beta1**t
        bc2 = 1.0 - cfg.beta2**t
        for p in self.params:
            g = p.grad
            m = self.m[p.name]
            v = self.v[p.name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + cfg.adam_eps)
            p.data = p.data - lr * (update + cfg.weight_decay * p.data)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def state_tensors(self, prefix):
        out = {f"{prefix}/step": np.array([float(self.step_count)])}
        for name in self.m:
            out[f"{prefix}/m/{name}"] = self.m[name]
            out[f"{prefix}/v/{name}"] = self.v[name]
        return out

    def load_state_tensors(self, tensors, prefix):
        self.step_count = int(tensors[f"{prefix}/step"][0])
        for p in self.params:
            self.m[p.name] = np.array(tensors[f"{prefix}/m/{p.name}"])
            self.v[p.name] = np.array(tensors[f"{prefix}/v/{p.name}"])


def hflip(image):
    """Mirror an [H, W, C] or [H, W] image left-right."""
    return np.ascontiguousarray(image[:, ::-1])


def sample_patch(pair, patch, rng, flip=True):
    """Crop the same random patch from a (degraded, clean) pair, with an
    optional shared horizontal flip. Images smaller than the patch are
    reflective-padded first (logged)."""
    degraded, clean = pair
    if degraded.shape != clean.shape:
        raise DatasetError(f"pair extents differ: {degraded.shape} vs {clean.shape}")
    h, w = degraded.shape[:2]
    pad_h, pad_w = max(0, patch - h), max(0, patch - w)
    if pad_h or pad_w:
        log.warning("padding %dx%d image reflectively to fit %d patch", h, w, patch)
        spec = ((0, pad_h), (0, pad_w), (0, 0))
        degraded = np.pad(degraded, spec, mode="reflect")
        clean = np.pad(clean, spec, mode="reflect")
        h, w = degraded.shape[:2]
    oy = rng.randint(h - patch + 1)
    ox = rng.randint(w - patch + 1)
    d = degraded[oy : oy + patch, ox : ox + patch]
    c = clean[oy : oy + patch, ox : ox + patch]
    if flip and rng.uniform() < 0.5:
        d, c = hflip(d), hflip(c)
    return np.ascontiguousarray(d), np.ascontiguousarray(c)


def load_dataset(data_dir, load_image):
    """Pairs degraded/<name>.png with clean/<name>.png.

    Returns a name-sorted list of (name, degraded, clean). Unpaired files
    raise, an empty directory raises.
    """
    deg_dir = os.path.join(data_dir, "degraded")
    cln_dir = os.path.join(data_dir, "clean")
    if not os.path.isdir(deg_dir) or not os.path.isdir(cln_dir):
        raise DatasetError(f"{data_dir} must contain degraded/ and clean/ subdirectories")
    deg = {f for f in os.listdir(deg_dir) if f.lower().endswith(".png")}
    cln = {f for f in os.listdir(cln_dir) if f.lower().endswith(".png")}
    unpaired = sorted(deg.symmetric_difference(cln))
    if unpaired:
        raise DatasetError(f"unpaired files: {unpaired}")
    if not deg:
        raise DatasetError(f"no image pairs found under {data_dir}")
    pairs = []
    for name in sorted(deg):
        pairs.append(
            (name, load_image(os.path.join(deg_dir, name)), load_image(os.path.join(cln_dir, name)))
        )
    return pairs


def model_state_tensors(model, optimizer, rng, rain_optimizer=None):
    tensors = {f"model/{name}": p.data for name, p in model.store.params.items()}
    tensors.update(optimizer.state_tensors("optim"))
    if rain_optimizer is not None:
        tensors.update(rain_optimizer.state_tensors("rainopt"))
    seed, counter = rng.state()
    tensors["rng/state"] = np.array(
        [float(seed & 0xFFFFFFFF), float(seed >> 32), float(counter & 0xFFFFFFFF), float(counter >> 32)]
    )
    return tensors


def restore_model_state(model, tensors, optimizer=None, rng=None, rain_optimizer=None):
    state = {
        name[len("model/"):]: arr for name, arr in tensors.items() if name.startswith("model/")
    }
    model.store.load_state_dict(state)
    if optimizer is not None and "optim/step" in tensors:
        optimizer.load_state_tensors(tensors, "optim")
    if rain_optimizer is not None and "rainopt/step" in tensors:
        rain_optimizer.load_state_tensors(tensors, "rainopt")
    if rng is not None and "rng/state" in tensors:
        s = tensors["rng/state"]
        seed = int(s[0]) | (int(s[1]) << 32)
        counter = int(s[2]) | (int(s[3]) << 32)
        rng.set_state((seed, counter))


def train(model, train_config, pairs, out_path, loss_weights=None, resume=None,
          log_every=25, max_steps=None):
    """Run the optimization loop and write the final checkpoint.

    ``pairs`` is the list from ``load_dataset``. Returns (checkpoint
    path, metrics), where metrics is one record per step. A non-finite
    loss aborts immediately, naming the step. ``max_steps`` caps the
    steps taken by this invocation without touching the schedule, so a
    capped run plus a resume reproduces an uninterrupted run exactly.
    """
    train_config.validate()
    if not pairs:
        raise DatasetError("empty dataset")
    weights = loss_weights or LossWeights()
    rng = E.Rng(train_config.seed)
    optimizer = AdamW(model.trainable_parameters(), train_config)
    rain_params = model.rain_parameters()
    rain_optimizer = AdamW(rain_params, train_config) if rain_params else None

    if resume is not None:
        tensors = load_checkpoint(resume)
        restore_model_state(model, tensors, optimizer, rng, rain_optimizer)
        log.info("resumed from %s at step %d", resume, optimizer.step_count)

    metrics = []
    start = optimizer.step_count
    stop = train_config.total_steps
    if max_steps is not None:
        stop = min(stop, start + max_steps)
    for step in range(start, stop):
        lr = lr_at(step, train_config)
        optimizer.zero_grad()
        batch_loss = None
        rain_loss = None
        for _ in range(train_config.batch_size):
            idx = rng.randint(len(pairs))
            _, degraded_full, clean_full = pairs[idx]
            degraded, clean = sample_patch(
                (degraded_full, clean_full), train_config.patch, rng, train_config.hflip
            )
            if model.theta is not None:
                prior = model.compute_prior(degraded, on_tape=True)
            else:
                prior = model.compute_prior(degraded, clean=clean)
            outputs = model.forward(degraded, prior)
            targets = build_target_pyramid(clean.transpose(2, 0, 1))
            loss = total_loss(outputs, targets, weights, ssim_window=train_config.ssim_window)
            batch_loss = loss if batch_loss is None else E.add(batch_loss, loss)
            if rain_optimizer is not None:
                gt_mask = rain_mask_gt(degraded, clean, model.config.rain_alpha)
                pred_mask = model.compute_prior(degraded, on_tape=True)
                aux = charbonnier(E.reshape(pred_mask, gt_mask.shape), E.constant(gt_mask))
                rain_loss = aux if rain_loss is None else E.add(rain_loss, aux)
        batch_loss = E.div(batch_loss, float(train_config.batch_size))
        loss_value = batch_loss.item()
        if not math.isfinite(loss_value):
            raise ContractError(f"non-finite loss {loss_value} at step {step}")
        E.backward(batch_loss)
        optimizer.step(lr)

        record = {"step": step, "lr": lr, "loss": loss_value}
        if rain_optimizer is not None:
            rain_optimizer.zero_grad()
            rain_loss = E.div(rain_loss, float(train_config.batch_size))
            rain_value = rain_loss.item()
            if not math.isfinite(rain_value):
                raise ContractError(f"non-finite rain mask loss {rain_value} at step {step}")
            E.backward(rain_loss)
            rain_optimizer.step(lr)
            record["rain_loss"] = rain_value
        metrics.append(record)
        if log_every and step % log_every == 0:
            log.info("step %d lr %.3e loss %.6f", step, lr, loss_value)
        if (
            train_config.checkpoint_every
            and (step + 1) % train_config.checkpoint_every == 0
            and step + 1 < train_config.total_steps
        ):
            save_checkpoint(
                model_state_tensors(model, optimizer, rng, rain_optimizer), out_path
            )
    save_checkpoint(model_state_tensors(model, optimizer, rng, rain_optimizer), out_path)
    return out_path, metrics


def load_model(path, model_config, seed=0):
    """Instantiate a model and load checkpoint weights into it."""
    model = RestorationModel(model_config, seed=seed)
    tensors = load_checkpoint(path)
    restore_model_state(model, tensors)
    return model
