"""Run configuration: a flat UTF-8 ``key = value`` file.

One option per line, ``#`` starts a comment, blank lines are ignored.
Unknown keys, duplicate keys, and unparseable values are rejected with
the offending line number. Serialization is canonical (keys sorted,
floats via repr), so parse and serialize round-trip byte-identically.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConfigurationError
from .losses import LossWeights
from .model import ModelConfig
from .tiling import TileSpec
from .trainer import TrainConfig


@dataclass
class RunConfig:
    # model
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
    # training
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
    # loss
    level_weights: tuple = (0.25, 0.5, 1.0)
    lambda_ssim: float = 0.5
    lambda_fft: float = 1e-4
    lambda_p: float = 0.5
    # paths (optional; command-line flags take precedence)
    data_dir: str = ""
    out_path: str = ""
    # tiled inference
    tile: int = 256
    overlap: int = 32

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            task=self.task,
            base_width=self.base_width,
            heads=self.heads,
            samb_blocks_per_level=self.samb_blocks_per_level,
            fia_width=self.fia_width,
            prior_width=self.prior_width,
            injection_mode=self.injection_mode,
            dual_branch=self.dual_branch,
            theta=self.theta,
            rain_alpha=self.rain_alpha,
            struct_scales=self.struct_scales,
        ).validate()

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            lr_init=self.lr_init,
            lr_final=self.lr_final,
            total_steps=self.total_steps,
            batch_size=self.batch_size,
            patch=self.patch,
            seed=self.seed,
            weight_decay=self.weight_decay,
            beta1=self.beta1,
            beta2=self.beta2,
            adam_eps=self.adam_eps,
            hflip=self.hflip,
            checkpoint_every=self.checkpoint_every,
            ssim_window=self.ssim_window,
        ).validate()

    def loss_weights(self) -> LossWeights:
        if len(self.level_weights) != 3:
            raise ConfigurationError(
                f"level_weights needs exactly 3 entries, got {len(self.level_weights)}"
            )
        if min(self.lambda_ssim, self.lambda_fft, self.lambda_p) < 0:
            raise ConfigurationError("loss weights must be non-negative")
        return LossWeights(
            level_weights=self.level_weights,
            lambda_ssim=self.lambda_ssim,
            lambda_fft=self.lambda_fft,
            lambda_p=self.lambda_p,
        )

    def validate(self) -> "RunConfig":
        self.model_config()
        self.train_config()
        self.loss_weights()
        self.tile_spec()
        return self

    def tile_spec(self) -> TileSpec:
        return TileSpec(tile=self.tile, overlap=self.overlap).validate()


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(key, raw, lineno):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "bool":
            if raw not in ("true", "false"):
                raise ValueError(raw)
            return raw == "true"
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "tuple":
            return tuple(float(part) for part in raw.split(","))
        return raw
    except ValueError:
        raise ConfigurationError(f"line {lineno}: bad value {raw!r} for key '{key}'") from None


def parse_run_config(text) -> RunConfig:
    """Parse config text; unknown or repeated keys name their line."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigurationError(f"line {lineno}: unknown key '{key}'")
        if key in values:
            raise ConfigurationError(f"line {lineno}: duplicate key '{key}'")
        values[key] = _parse_value(key, raw, lineno)
    return RunConfig(**values).validate()


def serialize_run_config(config: RunConfig) -> str:
    """Canonical form: one 'key = value' per line, keys sorted."""
    lines = [
        f"{name} = {_format_value(getattr(config, name))}" for name in sorted(_FIELD_TYPES)
    ]
    return "\n".join(lines) + "\n"


def load_run_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_run_config(fh.read())


def save_run_config(config: RunConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_run_config(config))
