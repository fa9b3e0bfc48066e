"""Training losses: pixel BCE, Dice family, and the weighted group loss.

All losses take probability tensors (after sigmoid) plus binary targets and
reduce over every element, so a batch is pooled as one pixel population.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import tensor as T
from .tensor import Tensor

BCE_EPS = 1e-7

BASE_BCE_DICE = "bce_dice"
BASE_BCE_SQUARED_DICE = "bce_squared_dice"


@dataclass
class LossConfig:
    smooth: float = 1.0
    stage_weights: list = field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4, 0.5])
    base_loss: str = BASE_BCE_SQUARED_DICE

    def validate(self):
        if self.smooth <= 0:
            raise ValueError("smooth must be positive")
        if len(self.stage_weights) != 5:
            raise ValueError(f"exactly 5 stage weights required, got {len(self.stage_weights)}")
        if self.base_loss not in (BASE_BCE_DICE, BASE_BCE_SQUARED_DICE):
            raise ValueError(f"unknown base_loss {self.base_loss!r}")
        return self


def bce(p: Tensor, y: Tensor) -> Tensor:
    """-mean(y*log p + (1-y)*log(1-p)) with p clamped to [eps, 1-eps]."""
    p = T.clamp(p, BCE_EPS, 1.0 - BCE_EPS)
    term = T.add(T.mul(y, T.log(p)), T.mul(T.rsub_scalar(y, 1.0), T.log(T.rsub_scalar(p, 1.0))))
    return T.mul_scalar(T.tsum(term), -1.0 / term.size)


def dice_loss(p: Tensor, y: Tensor, smooth: float = 1.0) -> Tensor:
    """1 - (2*sum(p*y) + smooth) / (sum(p) + sum(y) + smooth)."""
    inter = T.tsum(T.mul(p, y))
    denom = T.add_scalar(T.add(T.tsum(p), T.tsum(y)), smooth)
    ratio = T.div(T.add_scalar(T.mul_scalar(inter, 2.0), smooth), denom)
    return T.rsub_scalar(ratio, 1.0)


def squared_dice_loss(p: Tensor, y: Tensor, smooth: float = 1.0) -> Tensor:
    """1 - (2*sum(p*y)^2 + smooth) / (sum(p)^2 + sum(y)^2 + smooth)."""
    inter = T.tsum(T.mul(p, y))
    sp = T.tsum(p)
    sy = T.tsum(y)
    num = T.add_scalar(T.mul_scalar(T.mul(inter, inter), 2.0), smooth)
    denom = T.add_scalar(T.add(T.mul(sp, sp), T.mul(sy, sy)), smooth)
    return T.rsub_scalar(T.div(num, denom), 1.0)


def base_loss(p: Tensor, y: Tensor, cfg: LossConfig) -> Tensor:
    """BCE plus the configured Dice-family term (the per-head loss)."""
    if cfg.base_loss == BASE_BCE_DICE:
        return T.add(bce(p, y), dice_loss(p, y, cfg.smooth))
    return T.add(bce(p, y), squared_dice_loss(p, y, cfg.smooth))


def _upsample_to(logits: Tensor, h: int, w: int) -> Tensor:
    while logits.shape[-2] < h or logits.shape[-1] < w:
        logits = T.upsample_bilinear2x(logits)
    if logits.shape[-2:] != (h, w):
        raise T.ShapeError(
            f"stage logits {logits.shape} cannot be upsampled to {h}x{w}")
    return logits


def group_loss(out_logits: Tensor, stage_logits, target: Tensor,
               cfg: LossConfig | None = None) -> Tensor:
    """Output-head loss plus the weighted sum of the stage-head losses.

    Stage logits are bilinearly upsampled to the target resolution before the
    sigmoid; the target itself is never resampled. With deep supervision off
    (no stage logits) this reduces to the output loss alone.
    """
    cfg = (cfg or LossConfig()).validate()
    stage_logits = list(stage_logits)
    if stage_logits and len(stage_logits) != 5:
        raise ValueError(f"expected 5 stage logits, got {len(stage_logits)}")
    h, w = target.shape[-2:]
    total = base_loss(T.sigmoid(out_logits), target, cfg)
    for lam, logits in zip(cfg.stage_weights, stage_logits):
        p = T.sigmoid(_upsample_to(logits, h, w))
        total = T.add(total, T.mul_scalar(base_loss(p, target, cfg), lam))
    return total
