"""Flat ``key = value`` run configuration.

Defaults reproduce the training recipe exactly (lr 0.001, weight decay 0.01,
cosine T_max 50 to 1e-5, 300 epochs, batch 8 train / 1 test, 256x256 inputs,
channels 8..64, stage weights 0.1..0.5). Unknown keys are errors.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .losses import LossConfig
from .model import NetworkConfig
from .training import TrainConfig


class ConfigError(ValueError):
    pass


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_int_list(text):
    return [int(v) for v in text.replace(" ", "").split(",") if v]


def _parse_float_list(text):
    return [float(v) for v in text.replace(" ", "").split(",") if v]


def _parse_size(text):
    parts = text.lower().replace(" ", "").split("x")
    if len(parts) == 1:
        return (int(parts[0]), int(parts[0]))
    if len(parts) == 2:
        return (int(parts[0]), int(parts[1]))
    raise ConfigError(f"bad size {text!r} (use H or HxW)")


@dataclass
class RunConfig:
    manifest: str = ""
    data_root: str = ""
    checkpoint_dir: str = "checkpoints"
    channels: list = field(default_factory=lambda: [8, 16, 24, 32, 48, 64])
    input_size: tuple = (256, 256)
    block_kind: str = "variant_c_ucm"
    deep_supervision: bool = True
    leaky_slope: float = 0.01
    norm_eps: float = 1e-5
    bn_momentum: float = 0.1
    base_loss: str = "bce_squared_dice"
    smooth: float = 1.0
    stage_weights: list = field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4, 0.5])
    lr: float = 1e-3
    weight_decay: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    t_max: int = 50
    eta_min: float = 1e-5
    scheduler_mode: str = "periodic"
    epochs: int = 300
    batch_size: int = 8
    eval_batch: int = 1
    seed: int = 0
    augment: bool = True
    rotation_degrees: float = 360.0
    hflip_p: float = 0.5
    vflip_p: float = 0.5
    mask_threshold: int = 127
    threshold: float = 0.5

    def network_config(self) -> NetworkConfig:
        return NetworkConfig(
            stage_channels=list(self.channels),
            input_size=tuple(self.input_size),
            block_kind=self.block_kind,
            deep_supervision=self.deep_supervision,
            leaky_slope=self.leaky_slope,
            norm_eps=self.norm_eps,
            bn_momentum=self.bn_momentum,
        ).validate()

    def loss_config(self) -> LossConfig:
        return LossConfig(smooth=self.smooth,
                          stage_weights=list(self.stage_weights),
                          base_loss=self.base_loss).validate()

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size,
            eval_batch=self.eval_batch, lr=self.lr,
            weight_decay=self.weight_decay, beta1=self.beta1,
            beta2=self.beta2, adam_eps=self.adam_eps, t_max=self.t_max,
            eta_min=self.eta_min, scheduler_mode=self.scheduler_mode,
            seed=self.seed, checkpoint_dir=self.checkpoint_dir,
            augment=self.augment, rotation_degrees=self.rotation_degrees,
            hflip_p=self.hflip_p, vflip_p=self.vflip_p,
            threshold=self.threshold,
        ).validate()


_PARSERS = {
    str: lambda t: t.strip(),
    int: lambda t: int(t),
    float: lambda t: float(t),
    bool: _parse_bool,
    list: None,   # handled per-field below
    tuple: _parse_size,
}

_LIST_PARSERS = {
    "channels": _parse_int_list,
    "stage_weights": _parse_float_list,
}


def parse_config_text(text: str) -> RunConfig:
    cfg = RunConfig()
    known = {f.name: f.type for f in fields(RunConfig)}
    types = {f.name: type(getattr(cfg, f.name)) for f in fields(RunConfig)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in _LIST_PARSERS:
                parsed = _LIST_PARSERS[key](value)
            else:
                parsed = _PARSERS[types[key]](value)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r} ({exc})") from exc
        setattr(cfg, key, parsed)
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def default_config_text() -> str:
    cfg = RunConfig()
    lines = []
    for f in fields(RunConfig):
        val = getattr(cfg, f.name)
        if isinstance(val, (list, tuple)):
            if f.name == "input_size":
                val = f"{val[0]}x{val[1]}"
            else:
                val = ",".join(str(v) for v in val)
        lines.append(f"{f.name} = {val}")
    return "\n".join(lines) + "\n"
